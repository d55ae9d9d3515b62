#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>
#include <string>
#include <string_view>

#include "sketchscene/raster.hpp"

namespace sketchscene {

// Sketch-conditioned image generator (ControlNet role).
class SketchGenerator {
public:
    virtual ~SketchGenerator() = default;
    // Returns an image with the sketch's dimensions.
    virtual RgbImage generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) = 0;
    virtual std::string config_id() const = 0;
};

// Text-prompted segmenter (Grounded-SAM role).
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual Mask segment(const RgbImage& image, std::string_view class_label) = 0;
    virtual std::string config_id() const = 0;
};

inline constexpr std::uint8_t kInkThreshold = 128;

// Stub generator: ink pixels (< kInkThreshold) become a dark seed-dependent colour,
// blank pixels stay white.
class EchoGenerator final : public SketchGenerator {
public:
    RgbImage generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) override;
    std::string config_id() const override { return "stub-echo"; }
};

// Desk stub: mask = pixels whose mean channel value is below kInkThreshold.
class InkSegmenter final : public Segmenter {
public:
    Mask segment(const RgbImage& image, std::string_view class_label) override;
    std::string config_id() const override { return "stub-ink"; }
};

// One adapter call, as sent over the wire and hashed for record/replay.
struct AdapterRequest {
    std::string op;  // "generate_from_sketch" | "segment"
    std::string prompt_text;
    std::string class_label;
    std::uint64_t seed = 0;
    int width          = 0;
    int height         = 0;
    std::vector<std::uint8_t> payload;  // PNG bytes of the input raster

    // Content hash over every field including the payload bytes.
    std::string hash() const;
};

struct HttpEndpoint {
    std::string base_url;  // "http://host:port"; empty means unconfigured
    std::filesystem::path exchange_dir;  // shared directory for payload/artifact files
    std::chrono::milliseconds timeout{30000};
};

// Wire contract: POST {base_url}/invoke with
//   {"op", "payload": [path], "prompt_text", "class_label", "seed", "resolution": [w, h]}
// answered by {"status": "ok", "artifacts": [path]} or {"status": "error", "message"}.
class HttpAdapterClient {
public:
    explicit HttpAdapterClient(HttpEndpoint endpoint);
    // Returns the bytes of the first artifact the adapter produced.
    std::vector<std::uint8_t> invoke(const AdapterRequest& request);
    const HttpEndpoint& endpoint() const { return endpoint_; }

private:
    HttpEndpoint endpoint_;
};

class HttpGenerator final : public SketchGenerator {
public:
    explicit HttpGenerator(HttpEndpoint endpoint) : client_(std::move(endpoint)) {}
    RgbImage generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) override;
    std::string config_id() const override { return "http:" + client_.endpoint().base_url; }

private:
    HttpAdapterClient client_;
};

class HttpSegmenter final : public Segmenter {
public:
    explicit HttpSegmenter(HttpEndpoint endpoint) : client_(std::move(endpoint)) {}
    Mask segment(const RgbImage& image, std::string_view class_label) override;
    std::string config_id() const override { return "http:" + client_.endpoint().base_url; }

private:
    HttpAdapterClient client_;
};

enum class ReplayMode { Record, Replay };

// Content-addressed response store: <dir>/<request-hash>.png plus a
// <request-hash>.json describing the request.
class ReplayStore {
public:
    ReplayStore(std::filesystem::path dir, ReplayMode mode);

    ReplayMode mode() const { return mode_; }
    const std::filesystem::path& dir() const { return dir_; }

    std::optional<std::vector<std::uint8_t>> lookup(const AdapterRequest& request) const;
    void record(const AdapterRequest& request, std::span<const std::uint8_t> response);

private:
    std::filesystem::path dir_;
    ReplayMode mode_;
    mutable std::mutex mutex_;
};

// Record mode forwards to `inner` and stores the response; replay mode serves
// stored responses byte-for-byte and throws ReplayMissError on a miss.
class RecordingGenerator final : public SketchGenerator {
public:
    RecordingGenerator(std::shared_ptr<SketchGenerator> inner, std::shared_ptr<ReplayStore> store);
    RgbImage generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) override;
    std::string config_id() const override;

private:
    std::shared_ptr<SketchGenerator> inner_;
    std::shared_ptr<ReplayStore> store_;
};

class RecordingSegmenter final : public Segmenter {
public:
    RecordingSegmenter(std::shared_ptr<Segmenter> inner, std::shared_ptr<ReplayStore> store);
    Mask segment(const RgbImage& image, std::string_view class_label) override;
    std::string config_id() const override;

private:
    std::shared_ptr<Segmenter> inner_;
    std::shared_ptr<ReplayStore> store_;
};

AdapterRequest make_generate_request(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed);
AdapterRequest make_segment_request(const RgbImage& image, std::string_view class_label);

}  // namespace sketchscene
