#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <array>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "instasent/common/time.h"
#include "instasent/corpus/annotation_store.h"
#include "instasent/corpus/types.h"

namespace instasent::service {

struct ApiRequest {
  std::string method;  // "GET", "POST", ...
  std::string path;    // without the query string
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Next post awaiting a label from one annotator.
struct AnnotationTask {
  std::string post_id;
  std::string media_url;  // "/media/<post_id>"
  corpus::MediaKind media_kind = corpus::MediaKind::kImage;
  std::string final_text;
  std::vector<corpus::Annotation> existing;  // other annotators' effective labels
};

struct Progress {
  int labeled = 0;  // cleaned posts with at least one effective annotation
  int total = 0;
  // One-per-post counts for classes 1..5 at index 0..4.
  std::array<int, corpus::kNumClasses> image_counts{};
  std::array<int, corpus::kNumClasses> caption_counts{};
};

// Labeling API over a cleaned corpus. Request handling is transport-free;
// reads take a shared lock and writes an exclusive one, so the store sees
// appends one at a time. The append-only store is the source of truth and is
// replayed on construction.
//
// Endpoints (JSON bodies, errors as {"error": {"code", "message", "field"?}}):
//   GET  /tasks/next?annotator=ID  -> {"task": {...} | null, "remaining": n}
//   GET  /media/{post_id}          -> raw media bytes (?as=png: first frame)
//   POST /annotations              -> 201 {"annotation": {...}}
//   GET  /progress                 -> {"labeled", "total", "image_class", "caption_class"}
class AnnotationService {
 public:
  using Clock = std::function<UtcSeconds()>;

  // captions maps post_id to the text shown to annotators; posts without an
  // entry show their raw caption. The clock stamps POSTs lacking labeled_at.
  AnnotationService(std::vector<corpus::PostRecord> posts, std::map<std::string, std::string> captions,
                    std::filesystem::path media_root, std::filesystem::path store_path,
                    Clock clock = nullptr);

  ApiResponse Handle(const ApiRequest& request);

  std::optional<AnnotationTask> NextTask(const std::string& annotator_id, int* remaining = nullptr) const;
  Progress GetProgress() const;
  // Throws ArgumentError on validation failure and std::out_of_range for an
  // unknown post.
  corpus::Annotation Submit(const corpus::Annotation& annotation);

  const corpus::AnnotationStore& store() const { return store_; }

 private:
  ApiResponse Media(const std::string& post_id, bool as_png) const;
  ApiResponse PostAnnotation(const std::string& body);

  std::vector<corpus::PostRecord> queue_;  // by created_at, then post_id
  std::map<std::string, size_t> index_;
  std::map<std::string, std::string> captions_;
  std::filesystem::path media_root_;
  corpus::AnnotationStore store_;
  Clock clock_;

  mutable std::shared_mutex mu_;
  // Effective record per (post_id, annotator_id), cleaned posts only.
  std::map<std::pair<std::string, std::string>, corpus::Annotation> effective_;
};

std::string ErrorBody(const std::string& code, const std::string& message, const std::string& field = "");

// Binds the service to a TCP socket through cpp-httplib.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws IoError.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Serve();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace instasent::service
