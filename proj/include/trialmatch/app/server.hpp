#pragma once

#include <memory>
#include <string>

#include "trialmatch/app/artifacts.hpp"
#include "trialmatch/app/screening.hpp"

namespace trialmatch::app {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// When set, every request must carry "Authorization: Bearer <token>".
  std::string bearer_token;
};

/// JSON API over a pipeline directory plus the decision log:
///
///   GET  /cohorts
///   GET  /patients/{id}
///   GET  /patients/{id}/ranking?feature=combination&top=k
///   GET  /match/{patient_id}/{nct_id}
///   GET  /assignments/{annotator}
///   POST /decisions
///   GET  /decisions/export            (CSV)
///   GET  /screening/summary
class ApiServer {
 public:
  ApiServer(const ArtifactStore& store, DecisionLog& log, ServerConfig config = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the socket and returns the bound port.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  /// Safe from any thread, before or during listen(). A listen() that
  /// starts after stop() returns immediately.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trialmatch::app
