#include "sketchscene/adapters.hpp"

#include <httplib.h>

#include <algorithm>
#include <functional>
#include <json.hpp>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "wire.hpp"

using json = nlohmann::json;

namespace sketchscene {

RgbImage EchoGenerator::generate(const GrayImage& sketch, std::string_view, std::uint64_t seed) {
    const std::uint64_t h = splitmix64(seed);
    const std::uint8_t ink[3] = {static_cast<std::uint8_t>(h & 0x5f), static_cast<std::uint8_t>((h >> 8) & 0x5f),
                                 static_cast<std::uint8_t>((h >> 16) & 0x5f)};
    RgbImage out(sketch.width, sketch.height, 255);
    for (int y = 0; y < sketch.height; ++y)
        for (int x = 0; x < sketch.width; ++x)
            if (sketch.at(x, y) < kInkThreshold)
                for (int c = 0; c < 3; ++c) out.at(x, y, c) = ink[c];
    return out;
}

Mask InkSegmenter::segment(const RgbImage& image, std::string_view) {
    Mask m(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const int sum = image.at(x, y, 0) + image.at(x, y, 1) + image.at(x, y, 2);
            m.at(x, y)    = sum < 3 * kInkThreshold ? 1 : 0;
        }
    return m;
}

std::string AdapterRequest::hash() const {
    const json doc = {
        {"op", op},         {"prompt_text", prompt_text}, {"class_label", class_label},
        {"seed", seed},     {"resolution", {width, height}}, {"payload_sha256", sha256_hex(std::span<const std::uint8_t>(payload))},
    };
    return sha256_hex(doc.dump());
}

AdapterRequest make_generate_request(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) {
    AdapterRequest r;
    r.op          = "generate_from_sketch";
    r.prompt_text = std::string(prompt_text);
    r.seed        = seed;
    r.width       = sketch.width;
    r.height      = sketch.height;
    r.payload     = encode_png(sketch);
    return r;
}

AdapterRequest make_segment_request(const RgbImage& image, std::string_view class_label) {
    AdapterRequest r;
    r.op          = "segment";
    r.class_label = std::string(class_label);
    r.width       = image.width;
    r.height      = image.height;
    r.payload     = encode_png(image);
    return r;
}

HttpAdapterClient::HttpAdapterClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<std::uint8_t> HttpAdapterClient::invoke(const AdapterRequest& request) {
    if (endpoint_.base_url.empty()) throw ConnectivityError("adapter for '" + request.op + "' is not configured");
    std::filesystem::create_directories(endpoint_.exchange_dir);
    const auto payload_path = std::filesystem::absolute(endpoint_.exchange_dir / (request.hash() + ".in.png"));
    write_file_atomic(payload_path, request.payload);
    const json body = {
        {"op", request.op},
        {"payload", {payload_path.string()}},
        {"prompt_text", request.prompt_text},
        {"class_label", request.class_label},
        {"seed", request.seed},
        {"resolution", {request.width, request.height}},
    };
    return wire::invoke(endpoint_, body);
}

namespace wire {

std::vector<std::uint8_t> invoke(const HttpEndpoint& endpoint, const json& body) {
    const std::string op = body.value("op", std::string{});
    if (endpoint.base_url.empty()) throw ConnectivityError("adapter for '" + op + "' is not configured");
    httplib::Client client(endpoint.base_url);
    const auto secs = std::max<long long>(1, std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout).count());
    client.set_connection_timeout(static_cast<time_t>(secs));
    client.set_read_timeout(static_cast<time_t>(secs));
    auto res = client.Post("/invoke", body.dump(), "application/json");
    if (!res) {
        throw ConnectivityError("adapter at " + endpoint.base_url + " unreachable: " + httplib::to_string(res.error()));
    }
    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw ContractViolation("adapter reply is not a JSON document: " + std::string(e.what()));
    }
    if (!reply.is_object()) throw ContractViolation("adapter reply is not an object");
    const std::string status = reply.value("status", std::string{});
    if (status != "ok") {
        throw ContractViolation("adapter " + op + " returned status '" + status + "': " + reply.value("message", std::string{}));
    }
    if (!reply.contains("artifacts") || !reply["artifacts"].is_array() || reply["artifacts"].empty() ||
        !reply["artifacts"][0].is_string())
        throw ContractViolation("adapter reply lists no artifacts");
    const std::filesystem::path artifact = reply["artifacts"][0].get<std::string>();
    try {
        return read_file(artifact);
    } catch (const NotFoundError&) {
        throw ContractViolation("adapter artifact " + artifact.string() + " does not exist");
    }
}

}  // namespace wire

RgbImage HttpGenerator::generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) {
    const auto bytes = client_.invoke(make_generate_request(sketch, prompt_text, seed));
    RgbImage img;
    try {
        img = decode_png_rgb(bytes);
    } catch (const IoError& e) {
        throw ContractViolation(std::string("generator artifact: ") + e.what());
    }
    if (img.width != sketch.width || img.height != sketch.height)
        throw ContractViolation("generator returned " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                ", expected " + std::to_string(sketch.width) + "x" + std::to_string(sketch.height));
    return img;
}

Mask HttpSegmenter::segment(const RgbImage& image, std::string_view class_label) {
    const auto bytes = client_.invoke(make_segment_request(image, class_label));
    Mask m;
    try {
        m = decode_png_mask(bytes);
    } catch (const IoError& e) {
        throw ContractViolation(std::string("segmenter artifact: ") + e.what());
    }
    if (m.width != image.width || m.height != image.height)
        throw ContractViolation("segmenter returned " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                                ", expected " + std::to_string(image.width) + "x" + std::to_string(image.height));
    return m;
}

ReplayStore::ReplayStore(std::filesystem::path dir, ReplayMode mode) : dir_(std::move(dir)), mode_(mode) {
    std::filesystem::create_directories(dir_);
}

std::optional<std::vector<std::uint8_t>> ReplayStore::lookup(const AdapterRequest& request) const {
    std::lock_guard lock(mutex_);
    const auto path = dir_ / (request.hash() + ".png");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file(path);
}

void ReplayStore::record(const AdapterRequest& request, std::span<const std::uint8_t> response) {
    std::lock_guard lock(mutex_);
    const std::string key = request.hash();
    const json meta = {
        {"op", request.op},       {"prompt_text", request.prompt_text}, {"class_label", request.class_label},
        {"seed", request.seed},   {"resolution", {request.width, request.height}},
        {"response_sha256", sha256_hex(response)},
    };
    write_file_atomic(dir_ / (key + ".json"), meta.dump(2) + "\n");
    write_file_atomic(dir_ / (key + ".png"), response);
}

namespace {

std::vector<std::uint8_t> replay_or_record(ReplayStore& store, const AdapterRequest& request,
                                           const std::function<std::vector<std::uint8_t>()>& call) {
    if (auto hit = store.lookup(request)) return *hit;
    if (store.mode() == ReplayMode::Replay)
        throw ReplayMissError("no recorded response for " + request.op + " request " + request.hash());
    auto bytes = call();
    store.record(request, bytes);
    return bytes;
}

}  // namespace

RecordingGenerator::RecordingGenerator(std::shared_ptr<SketchGenerator> inner, std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string RecordingGenerator::config_id() const {
    return "replay(" + (inner_ ? inner_->config_id() : std::string("none")) + ")";
}

RgbImage RecordingGenerator::generate(const GrayImage& sketch, std::string_view prompt_text, std::uint64_t seed) {
    const auto request = make_generate_request(sketch, prompt_text, seed);
    const auto bytes   = replay_or_record(*store_, request, [&] {
        if (!inner_) throw ConnectivityError("no live generator behind the recorder");
        return encode_png(inner_->generate(sketch, prompt_text, seed));
    });
    return decode_png_rgb(bytes);
}

RecordingSegmenter::RecordingSegmenter(std::shared_ptr<Segmenter> inner, std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string RecordingSegmenter::config_id() const {
    return "replay(" + (inner_ ? inner_->config_id() : std::string("none")) + ")";
}

Mask RecordingSegmenter::segment(const RgbImage& image, std::string_view class_label) {
    const auto request = make_segment_request(image, class_label);
    const auto bytes   = replay_or_record(*store_, request, [&] {
        if (!inner_) throw ConnectivityError("no live segmenter behind the recorder");
        return encode_png(inner_->segment(image, class_label));
    });
    return decode_png_mask(bytes);
}

}  // namespace sketchscene
