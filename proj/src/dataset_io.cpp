#include "robophoto/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "robophoto/errors.hpp"

namespace robophoto::core {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name, std::size_t line) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'", line);
    return *it;
}

int int_field(const json& j, const char* name, std::size_t line) {
    const json& v = field(j, name, line);
    if (!v.is_number_integer()) throw ParseError(std::string("field '") + name + "' must be an integer", line);
    return v.get<int>();
}

std::string string_field(const json& j, const char* name, std::size_t line) {
    const json& v = field(j, name, line);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(std::string("field '") + name + "' must be a string", line);
}

std::optional<Quality> optional_label(const json& j, std::size_t line) {
    auto it = j.find("label");
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError("label must be a string", line);
    try {
        return quality_from_string(it->get<std::string>());
    } catch (const ParseError& e) {
        throw ParseError(e.what(), line);
    }
}

double feature_value(const json& features, std::string_view name, bool likelihood, std::size_t line) {
    const json& v = field(features, std::string(name).c_str(), line);
    if (v.is_number()) return v.get<double>();
    if (likelihood && v.is_string()) {
        try {
            return likelihood_level(v.get<std::string>());
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line);
        }
    }
    throw ParseError("feature '" + std::string(name) + "' must be numeric", line);
}

}  // namespace

PictureRecord record_from_json(const json& j, std::size_t line, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ParseError("record must be a JSON object", line);
    PictureRecord r;
    r.picture_id = string_field(j, "picture_id", line);
    r.burst_id = string_field(j, "burst_id", line);
    r.width = int_field(j, "width", line);
    r.height = int_field(j, "height", line);
    r.label = optional_label(j, line);

    const json& faces = field(j, "faces", line);
    if (!faces.is_array()) throw ParseError("faces must be an array", line);
    for (const json& fj : faces) {
        if (!fj.is_object()) throw ParseError("face must be a JSON object", line);
        FaceObservation face;
        const json& b = field(fj, "bbox", line);
        face.bbox = {int_field(b, "x_tl", line), int_field(b, "y_tl", line), int_field(b, "x_br", line),
                     int_field(b, "y_br", line)};
        const json& f = field(fj, "features", line);
        auto& ff = face.features;
        ff.roll = feature_value(f, "roll", false, line);
        ff.pitch = feature_value(f, "pitch", false, line);
        ff.yaw = feature_value(f, "yaw", false, line);
        ff.joy = feature_value(f, "joy", true, line);
        ff.sorrow = feature_value(f, "sorrow", true, line);
        ff.anger = feature_value(f, "anger", true, line);
        ff.surprise = feature_value(f, "surprise", true, line);
        ff.exposure = feature_value(f, "exposure", true, line);
        ff.blur = feature_value(f, "blur", true, line);
        face.label = optional_label(fj, line);
        if (auto it = fj.find("score"); it != fj.end() && !it->is_null()) {
            if (!it->is_number()) throw ParseError("face score must be numeric", line);
            face.score = it->get<double>();
        }
        if (auto it = fj.find("face_image_path"); it != fj.end() && !it->is_null()) {
            face.face_image_path = it->get<std::string>();
            try {
                face.face_image = read_pgm(base_dir / face.face_image_path);
            } catch (const ParseError& e) {
                throw ParseError(e.what(), line);
            }
        }
        r.faces.push_back(std::move(face));
    }
    return r;
}

json record_to_json(const PictureRecord& r) {
    json faces = json::array();
    for (const auto& face : r.faces) {
        json f;
        f["bbox"] = {{"x_tl", face.bbox.x_tl}, {"y_tl", face.bbox.y_tl}, {"x_br", face.bbox.x_br}, {"y_br", face.bbox.y_br}};
        json feats = json::object();
        const auto values = face.features.as_array();
        for (std::size_t k = 0; k < kFaceFeatureCount; ++k) feats[std::string(FaceFeatures::names()[k])] = values[k];
        f["features"] = feats;
        f["label"] = face.label ? json(to_string(*face.label)) : json(nullptr);
        if (face.score) f["score"] = *face.score;
        if (!face.face_image_path.empty()) f["face_image_path"] = face.face_image_path;
        faces.push_back(std::move(f));
    }
    json j;
    j["picture_id"] = r.picture_id;
    j["burst_id"] = r.burst_id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["label"] = r.label ? json(to_string(*r.label)) : json(nullptr);
    j["faces"] = std::move(faces);
    return j;
}

std::vector<PictureRecord> read_records(std::istream& in, const std::filesystem::path& base_dir) {
    std::vector<PictureRecord> records;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line);
        }
        try {
            records.push_back(record_from_json(j, line, base_dir));
        } catch (const json::exception& e) {
            throw ParseError(e.what(), line);
        }
    }
    return records;
}

ValidationResult load_dataset(const std::filesystem::path& path, const ValidateOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset " + path.string());
    return validate_dataset(read_records(in, path.parent_path()), path.string(), options);
}

void write_jsonl(std::ostream& out, const Dataset& dataset) {
    for (const auto& r : dataset.records) out << record_to_json(r).dump() << '\n';
}

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_jsonl(out, dataset);
}

}  // namespace robophoto::core
