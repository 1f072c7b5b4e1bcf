#include "instasent/corpus/annotation_store.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent::corpus {

using ordered_json = nlohmann::ordered_json;

std::string SerializeAnnotation(const Annotation& a) {
  ordered_json o;
  o["post_id"] = a.post_id;
  o["image_class"] = ToInt(a.image_class);
  o["caption_class"] = ToInt(a.caption_class);
  o["annotator_id"] = a.annotator_id;
  o["labeled_at"] = a.labeled_at;
  return o.dump();
}

Annotation ParseAnnotation(std::string_view line) {
  const auto o = ordered_json::parse(line, nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw ArgumentError("annotation is not a JSON object");
  auto text = [&](const char* key) {
    if (!o.contains(key) || !o[key].is_string() || o[key].get_ref<const std::string&>().empty())
      throw ArgumentError(std::string("annotation field ") + key + " must be a nonempty string");
    return o[key].get<std::string>();
  };
  auto label = [&](const char* key) {
    if (!o.contains(key) || !o[key].is_number_integer())
      throw ArgumentError(std::string("annotation field ") + key + " must be an integer 1-5");
    auto c = ClassFromInt(o[key].get<long long>());
    if (!c) throw ArgumentError(std::string("annotation field ") + key + " out of range 1-5");
    return *c;
  };
  Annotation a;
  a.post_id = text("post_id");
  a.image_class = label("image_class");
  a.caption_class = label("caption_class");
  a.annotator_id = text("annotator_id");
  if (o.contains("labeled_at")) {
    const auto& t = o["labeled_at"];
    std::optional<UtcSeconds> parsed;
    if (t.is_number_integer()) parsed = t.get<UtcSeconds>();
    else if (t.is_string()) parsed = ParseTimestamp(t.get_ref<const std::string&>());
    if (!parsed) throw ArgumentError("annotation field labeled_at is not a timestamp");
    a.labeled_at = *parsed;
  }
  return a;
}

std::vector<Annotation> EffectiveAnnotations(const std::vector<Annotation>& records) {
  std::map<std::pair<std::string, std::string>, size_t> slot;
  std::vector<Annotation> out;
  for (const auto& a : records) {
    auto [it, inserted] = slot.try_emplace({a.post_id, a.annotator_id}, out.size());
    if (inserted) out.push_back(a);
    else out[it->second] = a;
  }
  return out;
}

std::vector<Annotation> OnePerPost(const std::vector<Annotation>& annotations) {
  std::map<std::string, Annotation> best;
  for (const auto& a : annotations) {
    auto [it, inserted] = best.try_emplace(a.post_id, a);
    if (inserted) continue;
    const auto& cur = it->second;
    if (a.labeled_at > cur.labeled_at ||
        (a.labeled_at == cur.labeled_at && a.annotator_id < cur.annotator_id))
      it->second = a;
  }
  std::vector<Annotation> out;
  out.reserve(best.size());
  for (auto& [_, a] : best) out.push_back(std::move(a));
  return out;
}

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {}

void AnnotationStore::Append(const Annotation& a) {
  const std::string line = SerializeAnnotation(a) + "\n";
  std::lock_guard lock(mu_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << line;
  out.flush();
  if (!out) throw IoError("short write to " + path_.string());
}

std::vector<Annotation> AnnotationStore::LoadAll() const {
  std::lock_guard lock(mu_);
  std::vector<Annotation> out;
  if (!std::filesystem::exists(path_)) return out;
  std::istringstream in(ReadFileBytes(path_));
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ParseAnnotation(line));
    } catch (const ArgumentError& e) {
      throw IoError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void WriteAnnotations(const std::filesystem::path& path, const std::vector<Annotation>& records) {
  std::string text;
  for (const auto& a : records) text += SerializeAnnotation(a) + "\n";
  WriteFileBytes(path, text);
}

}  // namespace instasent::corpus
