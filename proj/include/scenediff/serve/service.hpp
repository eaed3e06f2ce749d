#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenediff/edit/edit.hpp"
#include "scenediff/train/train.hpp"

namespace scenediff::serve {

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine;
  /// Reported by /api/health.
  std::string checkpoint_hash;
};

/// Session state behind the HTTP API, without sockets.
///
///   POST /api/sessions                  {seed} or {scene}      -> {session_id}
///   GET  /api/sessions/{id}                                    -> {session_id, scene, history}
///   POST /api/sessions/{id}/synthesize  {prompt, seed?}        -> generation
///   POST /api/sessions/{id}/edit        {op, prompt, target_id, seed?} -> generation
///   GET  /api/health                                           -> {status, checkpoint_hash, ablation, points}
///
/// A generation is {points, guiding_points, attention_weights, seed,
/// entity_id, warnings} with flat row-major coordinate lists; edits of kind
/// alter_shape add `fixed`. Errors are {error} plus `field` for bad bodies.
/// Mutations hold a per-session writer lock; a second concurrent mutation
/// gets 409.
class Service {
 public:
  Service(train::GuidingPointsNet net, ServiceOptions options = {});

  Response handle(const std::string& method, const std::string& path, const std::string& body);

  /// Takes the session's writer lock as a mutation would. Throws
  /// std::out_of_range for an unknown id.
  std::unique_lock<std::mutex> hold_writer(const std::string& session_id);

  const train::GuidingPointsNet& model() const { return net_; }

 private:
  struct Session {
    std::string id;
    std::mutex writer;
    mutable std::shared_mutex state;
    data::Interaction scene;
    nlohmann::json history = nlohmann::json::array();
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  Response create_session(const nlohmann::json& body);
  Response get_session(Session& s) const;
  Response synthesize(Session& s, const nlohmann::json& body);
  Response apply_edit(Session& s, const nlohmann::json& body);
  Response health() const;

  train::GuidingPointsNet net_;
  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Flat row-major [x0, y0, z0, x1, ...].
nlohmann::json flatten(const geometry::PointCloud& cloud);

}  // namespace scenediff::serve
