#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sketchscene {

struct ArtifactRef {
    std::string name;  // role within its job, e.g. "render.png"
    std::string hash;  // sha256 of the bytes
    std::string media_type;

    friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

struct Blob {
    std::vector<std::uint8_t> bytes;
    std::string media_type;
};

// Content-addressed blob store:
//   <root>/blobs/<hash[0:2]>/<hash>
//   <root>/index.json   {"blobs": {hash: media_type}, "scenes": {scene_id: [ref...]}}
// Blobs are immutable; writing the same content twice is a no-op and a stored
// blob whose bytes no longer hash to its name raises IoError.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    std::string put(std::span<const std::uint8_t> bytes, const std::string& media_type);
    std::string put(const std::string& text, const std::string& media_type);
    std::optional<Blob> get(const std::string& hash) const;
    bool contains(const std::string& hash) const;
    bool verify(const std::string& hash) const;

    // Associates a stored blob with a scene for listing.
    ArtifactRef link(const std::string& scene_id, const std::string& name, const std::string& hash);
    std::vector<ArtifactRef> scene_artifacts(const std::string& scene_id) const;

    std::filesystem::path blob_path(const std::string& hash) const;

private:
    void save_index() const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> media_types_;
    std::map<std::string, std::vector<ArtifactRef>> scenes_;
};

std::string media_type_for(const std::string& name);

}  // namespace sketchscene
