#include "instasent/service/annotation_service.h"

#include <algorithm>
#include <ctime>
#include <mutex>

#include <nlohmann/json.hpp>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/common/raster.h"

namespace instasent::service {
namespace {

using nlohmann::ordered_json;
using corpus::Annotation;

ordered_json AnnotationJson(const Annotation& a) {
  return ordered_json::parse(corpus::SerializeAnnotation(a));
}

ApiResponse Json(int status, const ordered_json& body) { return {status, "application/json", body.dump()}; }

ApiResponse Error(int status, const std::string& code, const std::string& message,
                  const std::string& field = "") {
  return {status, "application/json", ErrorBody(code, message, field)};
}

// Mirrors ParseAnnotation but reports which field failed.
Annotation ValidateBody(const ordered_json& o, std::string& field) {
  auto text = [&](const char* key) {
    field = key;
    if (!o.contains(key) || !o[key].is_string() || o[key].get_ref<const std::string&>().empty())
      throw ArgumentError(std::string(key) + " must be a nonempty string");
    return o[key].get<std::string>();
  };
  auto label = [&](const char* key) {
    field = key;
    if (!o.contains(key)) throw ArgumentError(std::string(key) + " is required");
    if (!o[key].is_number_integer()) throw ArgumentError(std::string(key) + " must be an integer 1-5");
    auto c = corpus::ClassFromInt(o[key].get<long long>());
    if (!c) throw ArgumentError(std::string(key) + " must be in 1-5");
    return *c;
  };
  Annotation a;
  a.post_id = text("post_id");
  a.image_class = label("image_class");
  a.caption_class = label("caption_class");
  a.annotator_id = text("annotator_id");
  field = "labeled_at";
  if (o.contains("labeled_at")) a = corpus::ParseAnnotation(o.dump());
  field.clear();
  return a;
}

}  // namespace

std::string ErrorBody(const std::string& code, const std::string& message, const std::string& field) {
  ordered_json e;
  e["code"] = code;
  e["message"] = message;
  if (!field.empty()) e["field"] = field;
  return ordered_json{{"error", e}}.dump();
}

AnnotationService::AnnotationService(std::vector<corpus::PostRecord> posts,
                                     std::map<std::string, std::string> captions,
                                     std::filesystem::path media_root, std::filesystem::path store_path,
                                     Clock clock)
    : queue_(std::move(posts)),
      captions_(std::move(captions)),
      media_root_(std::move(media_root)),
      store_(std::move(store_path)),
      clock_(clock ? std::move(clock) : Clock([] { return static_cast<UtcSeconds>(std::time(nullptr)); })) {
  std::stable_sort(queue_.begin(), queue_.end(), [](const auto& a, const auto& b) {
    const auto ta = a.created_at.value_or(0), tb = b.created_at.value_or(0);
    return ta != tb ? ta < tb : a.post_id < b.post_id;
  });
  for (size_t i = 0; i < queue_.size(); ++i)
    if (!index_.emplace(queue_[i].post_id, i).second)
      throw ArgumentError("duplicate post_id " + queue_[i].post_id + " in annotation corpus");
  for (const auto& a : store_.LoadAll())
    if (index_.count(a.post_id)) effective_[{a.post_id, a.annotator_id}] = a;
}

std::optional<AnnotationTask> AnnotationService::NextTask(const std::string& annotator_id,
                                                          int* remaining) const {
  std::shared_lock lock(mu_);
  std::optional<AnnotationTask> task;
  int left = 0;
  for (const auto& post : queue_) {
    if (effective_.count({post.post_id, annotator_id})) continue;
    ++left;
    if (task) continue;
    task.emplace();
    task->post_id = post.post_id;
    task->media_url = "/media/" + post.post_id;
    task->media_kind = post.media_kind.value_or(corpus::MediaKind::kImage);
    auto c = captions_.find(post.post_id);
    task->final_text = c != captions_.end() ? c->second : post.caption.value_or("");
    for (auto it = effective_.lower_bound({post.post_id, ""});
         it != effective_.end() && it->first.first == post.post_id; ++it)
      task->existing.push_back(it->second);
  }
  if (remaining) *remaining = left;
  return task;
}

Progress AnnotationService::GetProgress() const {
  std::shared_lock lock(mu_);
  Progress p;
  p.total = static_cast<int>(queue_.size());
  std::vector<Annotation> records;
  for (const auto& [key, a] : effective_) records.push_back(a);
  for (const auto& a : corpus::OnePerPost(records)) {
    ++p.labeled;
    ++p.image_counts[corpus::ToInt(a.image_class) - 1];
    ++p.caption_counts[corpus::ToInt(a.caption_class) - 1];
  }
  return p;
}

Annotation AnnotationService::Submit(const Annotation& annotation) {
  if (annotation.post_id.empty() || annotation.annotator_id.empty())
    throw ArgumentError("post_id and annotator_id must be nonempty");
  if (!corpus::ClassFromInt(corpus::ToInt(annotation.image_class)) ||
      !corpus::ClassFromInt(corpus::ToInt(annotation.caption_class)))
    throw ArgumentError("classes must be in 1-5");
  std::unique_lock lock(mu_);
  if (!index_.count(annotation.post_id)) throw std::out_of_range("unknown post_id " + annotation.post_id);
  store_.Append(annotation);
  effective_[{annotation.post_id, annotation.annotator_id}] = annotation;
  return annotation;
}

ApiResponse AnnotationService::Media(const std::string& post_id, bool as_png) const {
  std::filesystem::path path;
  {
    std::shared_lock lock(mu_);
    auto it = index_.find(post_id);
    if (it == index_.end()) return Error(404, "not_found", "unknown post_id " + post_id, "post_id");
    const auto& post = queue_[it->second];
    if (!post.media_path) return Error(404, "not_found", "post has no media", "post_id");
    path = media_root_ / *post.media_path;
  }
  try {
    if (as_png) return {200, "image/png", EncodePng(DecodeMediaFile(path))};
    const bool png = path.extension() == ".png";
    return {200, png ? "image/png" : "application/octet-stream", ReadFileBytes(path)};
  } catch (const std::exception& e) {
    return Error(500, "media_unreadable", e.what());
  }
}

ApiResponse AnnotationService::PostAnnotation(const std::string& body) {
  const auto o = ordered_json::parse(body, nullptr, false);
  if (o.is_discarded() || !o.is_object()) return Error(400, "malformed_body", "body must be a JSON object");
  Annotation a;
  std::string field;
  try {
    a = ValidateBody(o, field);
  } catch (const ArgumentError& e) {
    return Error(400, "validation_error", e.what(), field);
  }
  if (!o.contains("labeled_at")) a.labeled_at = clock_();
  try {
    return Json(201, {{"annotation", AnnotationJson(Submit(a))}});
  } catch (const std::out_of_range& e) {
    return Error(404, "not_found", e.what(), "post_id");
  } catch (const IoError& e) {
    return Error(500, "store_unwritable", e.what());
  }
}

ApiResponse AnnotationService::Handle(const ApiRequest& req) {
  const std::string& p = req.path;
  if (p == "/tasks/next") {
    if (req.method != "GET") return Error(405, "method_not_allowed", "use GET");
    auto it = req.query.find("annotator");
    if (it == req.query.end() || it->second.empty())
      return Error(400, "validation_error", "annotator query parameter is required", "annotator");
    int remaining = 0;
    auto task = NextTask(it->second, &remaining);
    ordered_json out;
    if (task) {
      ordered_json t;
      t["post_id"] = task->post_id;
      t["media_url"] = task->media_url;
      t["media_kind"] = std::string(corpus::ToString(task->media_kind));
      t["final_text"] = task->final_text;
      t["existing"] = ordered_json::array();
      for (const auto& a : task->existing) t["existing"].push_back(AnnotationJson(a));
      out["task"] = t;
    } else {
      out["task"] = nullptr;
    }
    out["remaining"] = remaining;
    return Json(200, out);
  }
  if (p.rfind("/media/", 0) == 0) {
    if (req.method != "GET") return Error(405, "method_not_allowed", "use GET");
    auto as = req.query.find("as");
    return Media(p.substr(7), as != req.query.end() && as->second == "png");
  }
  if (p == "/annotations") {
    if (req.method != "POST") return Error(405, "method_not_allowed", "use POST");
    return PostAnnotation(req.body);
  }
  if (p == "/progress") {
    if (req.method != "GET") return Error(405, "method_not_allowed", "use GET");
    const auto prog = GetProgress();
    ordered_json out;
    out["labeled"] = prog.labeled;
    out["total"] = prog.total;
    ordered_json image, caption;
    for (int c = 0; c < corpus::kNumClasses; ++c) {
      image[std::to_string(c + 1)] = prog.image_counts[c];
      caption[std::to_string(c + 1)] = prog.caption_counts[c];
    }
    out["image_class"] = image;
    out["caption_class"] = caption;
    return Json(200, out);
  }
  return Error(404, "no_route", "no endpoint " + req.method + " " + p);
}

}  // namespace instasent::service
