#pragma once

#include <string>

#include "robophoto/core.hpp"

namespace testing {

inline robophoto::core::FaceObservation face_at(int x_tl, int y_tl, int x_br, int y_br,
                                                std::optional<double> score = std::nullopt) {
    robophoto::core::FaceObservation f;
    f.bbox = {x_tl, y_tl, x_br, y_br};
    f.score = score;
    return f;
}

inline robophoto::core::PictureRecord picture(const std::string& id, const std::string& burst, int w, int h,
                                              std::vector<robophoto::core::FaceObservation> faces = {}) {
    robophoto::core::PictureRecord p;
    p.picture_id = id;
    p.burst_id = burst;
    p.width = w;
    p.height = h;
    p.faces = std::move(faces);
    return p;
}

}  // namespace testing
