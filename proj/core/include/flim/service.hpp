#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace flim {

/// HTTP API behind the marker studio. Each project lives in its own
/// directory under `root` (images/, markers/, arch.json, state.json and the
/// trained prefix as model.flim), so any project can be replayed with the
/// command-line tool. Existing project directories are loaded on start.
///
///   POST /projects
///   GET  /projects/{id}
///   POST /projects/{id}/images?name=x.png            PNG body
///   PUT  /projects/{id}/images/{img}/markers         marker PNG body
///   GET  /projects/{id}/images/{img}/markers
///   PUT  /projects/{id}/arch                         architecture JSON
///   POST /projects/{id}/layers/{l}/train             {"seed": n, "simplify": k}
///   GET  /projects/{id}/layers/{l}/activations/{img}?channel=b
///   GET  /projects/{id}/decode/{img}?layer=l[&format=png]
///   GET  /projects/{id}/export
class StudioServer {
 public:
  explicit StudioServer(std::filesystem::path root);
  ~StudioServer();
  StudioServer(const StudioServer&) = delete;
  StudioServer& operator=(const StudioServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flim
