#include "sketchscene/scene_model.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "sketchscene/errors.hpp"

using json = nlohmann::json;

namespace sketchscene {

std::string ObjectAnnotation::generation_prompt() const {
    if (!prompt_text.empty()) return prompt_text;
    return "a photo of a " + class_label;
}

const ObjectAnnotation* SceneSpec::find(std::string_view object_id) const {
    for (const auto& o : objects)
        if (o.object_id == object_id) return &o;
    return nullptr;
}

std::string identity_token_for(std::string_view object_id) {
    return "<obj-" + std::string(object_id) + ">";
}

std::string describe(const Violation& v) {
    std::string out = v.invariant;
    if (!v.object_id.empty()) out += " [" + v.object_id + "]";
    return out + ": " + v.message;
}

ValidationReport validate_scene(const SceneSpec& spec) {
    ValidationReport report;
    auto add = [&](std::string inv, std::string oid, std::string msg) {
        report.push_back({std::move(inv), std::move(oid), std::move(msg)});
    };

    if (spec.scene_id.empty()) add("scene.id", "", "scene_id is empty");
    if (spec.canvas.width <= 0 || spec.canvas.height <= 0) add("canvas.size", "", "canvas dimensions must be positive");
    if (spec.sketch.width != spec.canvas.width || spec.sketch.height != spec.canvas.height) {
        add("sketch.size", "",
            "sketch is " + std::to_string(spec.sketch.width) + "x" + std::to_string(spec.sketch.height) +
                ", canvas is " + std::to_string(spec.canvas.width) + "x" + std::to_string(spec.canvas.height));
    }
    if (spec.objects.empty()) add("objects.count", "", "scene has no objects");

    std::set<std::string> seen;
    for (const auto& o : spec.objects) {
        if (o.object_id.empty()) add("object.id", "", "object_id is empty");
        if (!seen.insert(o.object_id).second) add("object.duplicate", o.object_id, "duplicate identifier");
        if (o.region.width <= 0) add("box.width", o.object_id, "bounding box width must be > 0");
        if (o.region.height <= 0) add("box.height", o.object_id, "bounding box height must be > 0");
        if (!o.region.empty() && intersect(o.region, spec.canvas_rect()).empty())
            add("box.outside", o.object_id, "bounding box lies entirely outside the canvas");
        if (o.class_label.empty()) add("object.class_label", o.object_id, "class_label is empty");
    }
    return report;
}

ValidationReport validate_render_config(const RenderConfig& cfg, int factor) {
    ValidationReport report;
    if (cfg.steps < 1 || cfg.steps > 1000) report.push_back({"render.steps", "", "T must lie in [1, 1000]"});
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) report.push_back({"render.alpha", "", "alpha must lie in [0, 1]"});
    if (cfg.width <= 0 || cfg.height <= 0 || (factor > 0 && (cfg.width % factor != 0 || cfg.height % factor != 0)))
        report.push_back({"render.resolution", "",
                          "resolution must be positive multiples of the latent factor " + std::to_string(factor)});
    if (!(cfg.guidance_scale >= 0.0)) report.push_back({"render.guidance_scale", "", "guidance_scale must be >= 0"});
    return report;
}

ValidationReport validate_asset(const ObjectAsset& asset) {
    ValidationReport report;
    if (asset.image.width != asset.mask.width || asset.image.height != asset.mask.height)
        report.push_back({"asset.size", asset.object_id, "image and mask dimensions differ"});
    if (!asset.mask.is_binary()) report.push_back({"asset.mask_binary", asset.object_id, "mask is not binary"});
    if (asset.mask.count() == 0) report.push_back({"asset.mask_empty", asset.object_id, "mask has no foreground"});
    return report;
}

std::string format_timestamp(std::chrono::sys_seconds t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

std::chrono::sys_seconds parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char tail = 0;
    const std::string buf(text);
    if (std::sscanf(buf.c_str(), "%d-%u-%uT%u:%u:%u%c", &y, &mo, &d, &h, &mi, &s, &tail) != 7 || tail != 'Z')
        throw ParseError("bad timestamp '" + buf + "'", 0);
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw ParseError("bad timestamp '" + buf + "'", 0);
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string serialize_scene(const SceneSpec& spec) {
    json objects = json::array();
    for (const auto& o : spec.objects) {
        json strokes = json::array();
        for (const auto& line : o.strokes) {
            json pts = json::array();
            for (const auto& p : line) pts.push_back({p.x, p.y});
            strokes.push_back(std::move(pts));
        }
        objects.push_back({
            {"object_id", o.object_id},
            {"class_label", o.class_label},
            {"prompt_text", o.prompt_text},
            {"box", {{"l", o.region.left}, {"t", o.region.top}, {"w", o.region.width}, {"h", o.region.height}}},
            {"strokes", std::move(strokes)},
        });
    }
    json doc = {
        {"schema_version", kSceneSchemaVersion},
        {"scene_id", spec.scene_id},
        {"background_text", spec.background_text},
        {"created_at", format_timestamp(spec.created_at)},
        {"canvas", {{"width", spec.canvas.width}, {"height", spec.canvas.height}}},
        {"objects", std::move(objects)},
        {"sketch_path", spec.sketch_path},
    };
    return doc.dump(2) + "\n";
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("field '") + key + "': " + e.what(), 0);
    }
}

SceneSpec deserialize_document(std::string_view document, const SketchLoader& loader) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object()) throw ParseError("scene document must be an object", 0);
    const int version = field<int>(doc, "schema_version");
    if (version != kSceneSchemaVersion)
        throw VersionError("scene schema version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kSceneSchemaVersion) + ")");

    SceneSpec spec;
    spec.scene_id        = field<std::string>(doc, "scene_id");
    spec.background_text = doc.value("background_text", std::string{});
    if (doc.contains("created_at")) spec.created_at = parse_timestamp(field<std::string>(doc, "created_at"));
    const auto canvas    = field<json>(doc, "canvas");
    spec.canvas.width    = field<int>(canvas, "width");
    spec.canvas.height   = field<int>(canvas, "height");
    spec.sketch_path     = doc.value("sketch_path", std::string("sketch.png"));

    const auto objects = field<json>(doc, "objects");
    if (!objects.is_array()) throw ParseError("objects must be an array", 0);
    for (const auto& jo : objects) {
        ObjectAnnotation o;
        o.object_id   = field<std::string>(jo, "object_id");
        o.class_label = jo.value("class_label", std::string{});
        o.prompt_text = jo.value("prompt_text", std::string{});
        const auto box = field<json>(jo, "box");
        o.region       = Rect{field<int>(box, "l"), field<int>(box, "t"), field<int>(box, "w"), field<int>(box, "h")};
        if (jo.contains("strokes")) {
            if (!jo.at("strokes").is_array()) throw ParseError("strokes must be an array", 0);
            for (const auto& line : jo.at("strokes")) {
                Polyline pl;
                for (const auto& p : line) {
                    if (!p.is_array() || p.size() != 2) throw ParseError("stroke point must be [x, y]", 0);
                    if (!p[0].is_number() || !p[1].is_number()) throw ParseError("stroke point must be numeric", 0);
                    pl.push_back({p[0].get<double>(), p[1].get<double>()});
                }
                o.strokes.push_back(std::move(pl));
            }
        }
        spec.objects.push_back(std::move(o));
    }

    if (loader) {
        spec.sketch = loader(spec.sketch_path);
    } else if (spec.canvas.width > 0 && spec.canvas.height > 0) {
        spec.sketch = GrayImage(spec.canvas.width, spec.canvas.height, 255);
    }
    return spec;
}

}  // namespace

SceneSpec deserialize_scene(std::string_view document, const SketchLoader& loader) {
    try {
        return deserialize_document(document, loader);
    } catch (const json::exception& e) {
        throw ParseError(e.what(), 0);
    }
}

void save_scene(const SceneSpec& spec, const std::filesystem::path& document_path) {
    const auto dir = document_path.parent_path();
    write_file_atomic(dir / spec.sketch_path, encode_png(spec.sketch));
    write_file_atomic(document_path, serialize_scene(spec));
}

SceneSpec load_scene(const std::filesystem::path& document_path) {
    const auto bytes = read_file(document_path);
    const auto dir   = document_path.parent_path();
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return deserialize_scene(text, [&](const std::string& rel) { return decode_png_gray(read_file(dir / rel)); });
}

}  // namespace sketchscene
