#include "sketchscene/artifact_store.hpp"

#include <algorithm>

#include <json.hpp>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/raster.hpp"

using json = nlohmann::json;

namespace sketchscene {

namespace {

bool valid_hash(const std::string& h) {
    return h.size() == 64 && std::all_of(h.begin(), h.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

std::string media_type_for(const std::string& name) {
    auto ends = [&](std::string_view suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends(".png")) return "image/png";
    if (ends(".json")) return "application/json";
    if (ends(".csv")) return "text/csv";
    return "application/octet-stream";
}

ArtifactStore::ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "blobs");
    const auto index = root_ / "index.json";
    if (!std::filesystem::exists(index)) return;
    const auto bytes = read_file(index);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
        for (auto& [hash, type] : doc.at("blobs").items()) media_types_[hash] = type.get<std::string>();
        for (auto& [scene, refs] : doc.at("scenes").items()) {
            auto& list = scenes_[scene];
            for (const auto& r : refs)
                list.push_back({r.at("name").get<std::string>(), r.at("hash").get<std::string>(),
                                r.at("media_type").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw IoError("artifact index " + index.string() + " is corrupt: " + e.what());
    }
}

std::filesystem::path ArtifactStore::blob_path(const std::string& hash) const {
    return root_ / "blobs" / hash.substr(0, 2) / hash;
}

void ArtifactStore::save_index() const {
    json blobs = json::object();
    for (const auto& [h, t] : media_types_) blobs[h] = t;
    json scenes = json::object();
    for (const auto& [s, refs] : scenes_) {
        json list = json::array();
        for (const auto& r : refs) list.push_back({{"name", r.name}, {"hash", r.hash}, {"media_type", r.media_type}});
        scenes[s] = list;
    }
    write_file_atomic(root_ / "index.json", json{{"blobs", blobs}, {"scenes", scenes}}.dump(2) + "\n");
}

std::string ArtifactStore::put(std::span<const std::uint8_t> bytes, const std::string& media_type) {
    const std::string hash = sha256_hex(bytes);
    std::lock_guard lock(mutex_);
    const auto path = blob_path(hash);
    if (std::filesystem::exists(path)) {
        if (sha256_hex(std::span<const std::uint8_t>(read_file(path))) != hash)
            throw IoError("stored blob " + hash + " was modified");
    } else {
        std::filesystem::create_directories(path.parent_path());
        write_file_atomic(path, bytes);
    }
    if (media_types_.emplace(hash, media_type).second) save_index();
    return hash;
}

std::string ArtifactStore::put(const std::string& text, const std::string& media_type) {
    return put(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
               media_type);
}

bool ArtifactStore::contains(const std::string& hash) const {
    return valid_hash(hash) && std::filesystem::exists(blob_path(hash));
}

std::optional<Blob> ArtifactStore::get(const std::string& hash) const {
    if (!contains(hash)) return std::nullopt;
    Blob b;
    b.bytes = read_file(blob_path(hash));
    std::lock_guard lock(mutex_);
    auto it      = media_types_.find(hash);
    b.media_type = it == media_types_.end() ? "application/octet-stream" : it->second;
    return b;
}

bool ArtifactStore::verify(const std::string& hash) const {
    if (!contains(hash)) return false;
    return sha256_hex(std::span<const std::uint8_t>(read_file(blob_path(hash)))) == hash;
}

ArtifactRef ArtifactStore::link(const std::string& scene_id, const std::string& name, const std::string& hash) {
    std::lock_guard lock(mutex_);
    auto it = media_types_.find(hash);
    if (it == media_types_.end()) throw NotFoundError("artifact " + hash + " is not stored");
    ArtifactRef ref{name, hash, it->second};
    auto& list = scenes_[scene_id];
    if (std::find(list.begin(), list.end(), ref) == list.end()) {
        list.push_back(ref);
        save_index();
    }
    return ref;
}

std::vector<ArtifactRef> ArtifactStore::scene_artifacts(const std::string& scene_id) const {
    std::lock_guard lock(mutex_);
    auto it = scenes_.find(scene_id);
    return it == scenes_.end() ? std::vector<ArtifactRef>{} : it->second;
}

}  // namespace sketchscene
