#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sketchscene/artifact_store.hpp"
#include "sketchscene/backend.hpp"
#include "sketchscene/identity.hpp"
#include "sketchscene/pipeline.hpp"

namespace sketchscene {

enum class JobKind { GenerateObject, TrainIdentities, Compose, Render, AlphaSweep };
enum class JobStatus { Queued, Running, Succeeded, Failed };

std::string_view to_string(JobKind kind);
std::string_view to_string(JobStatus status);

struct ProgressEvent {
    std::string job_id;
    int step  = 0;
    int total = 0;
    std::string note;
};

struct JobView {
    std::string job_id;
    JobKind kind = JobKind::Render;
    std::string scene_id;
    JobStatus status = JobStatus::Queued;
    double progress  = 0.0;
    std::string inputs_hash;
    std::vector<ArtifactRef> outputs;
    std::string error;
    int restarts = 0;
};

// Start/finish of one job execution, for scheduling audits.
struct JobRun {
    std::string job_id;
    std::string scene_id;
    std::chrono::steady_clock::time_point started;
    std::chrono::steady_clock::time_point finished;
};

struct ServiceOptions {
    std::filesystem::path root;
    int pool_size = 1;
    BackendFactory backend_factory;
    AdapterSet adapters;
    TrainConfig train_defaults;  // fills steps and learning_rate missing from train jobs
};

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

// Scene registry, job queue and worker pool behind the HTTP API.
//
// Layout under root:
//   scenes/<scene_id>/{scene.json,sketch.png,meta.json}   meta holds the revision
//   scenes/<scene_id>/work/...                            SceneWorkspace
//   jobs/<job_id>.json
//   store/...                                             ArtifactStore
//
// Jobs for one scene run in submission order, never concurrently; jobs for
// different scenes run in parallel up to pool_size. A job found "running" at
// start-up is re-queued once; found running again it is failed as poison.
class PipelineService {
public:
    explicit PipelineService(ServiceOptions options);
    ~PipelineService();

    PipelineService(const PipelineService&)            = delete;
    PipelineService& operator=(const PipelineService&) = delete;

    // Binds and serves on a background thread. Port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();
    int port() const;

    std::optional<JobView> job(const std::string& job_id) const;
    // Blocks until the job succeeds or fails, or the timeout lapses.
    std::optional<JobView> wait(const std::string& job_id, std::chrono::milliseconds timeout) const;
    std::vector<ProgressEvent> events(const std::string& job_id, std::size_t since = 0) const;
    std::vector<JobRun> runs() const;

    ArtifactStore& store();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace sketchscene
