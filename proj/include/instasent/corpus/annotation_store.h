#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "instasent/corpus/types.h"

namespace instasent::corpus {

std::string SerializeAnnotation(const Annotation& a);
// Throws ArgumentError on malformed input or classes outside 1..5.
Annotation ParseAnnotation(std::string_view line);

// Last record per (post_id, annotator_id) wins; result keeps the position of
// each key's first appearance.
std::vector<Annotation> EffectiveAnnotations(const std::vector<Annotation>& records);

// One annotation per post: latest labeled_at, ties broken by the smaller
// annotator_id. Sorted by post_id.
std::vector<Annotation> OnePerPost(const std::vector<Annotation>& annotations);

// Append-only record-per-line store. Appends are serialized by an internal
// mutex and flushed before returning.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  void Append(const Annotation& a);
  // Every raw record, in file order. A missing file reads as empty.
  std::vector<Annotation> LoadAll() const;
  std::vector<Annotation> LoadEffective() const { return EffectiveAnnotations(LoadAll()); }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

void WriteAnnotations(const std::filesystem::path& path, const std::vector<Annotation>& records);

}  // namespace instasent::corpus
