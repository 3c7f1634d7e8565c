#pragma once

#include <cstdint>
#include <vector>

#include "robophoto/composition.hpp"
#include "robophoto/core.hpp"

// Rule-labeled synthetic data. Real labels come from human raters; these
// generators stand in for them wherever a known ground truth is needed.
namespace robophoto::synth {

/// Good iff |yaw| < 20 and joy > 0.6 and blur < 0.3.
bool face_rule(const core::FaceFeatures& f);

/// Each rule condition holds with probability 0.8, so roughly half the faces
/// are good before noise. `label_noise` is the flip probability.
std::vector<core::FaceObservation> rule_labeled_faces(std::size_t n, double label_noise, std::uint64_t seed);

/// Grayscale face crop drawn from the features: a bright oval shifted by
/// yaw, a mouth bar that widens with joy and a box blur that grows with blur.
GrayImage face_crop(const core::FaceFeatures& features, int width = 40, int height = 30);

/// Pictures (3000x2000, 1-3 faces) labeled by `hidden` through the
/// matching scorer gate, about half Good. No face quantity lies within
/// `margin` of a threshold. Heuristic sets get uniform face scores.
core::Dataset threshold_labeled_pictures(std::size_t n, const composition::ThresholdSet& hidden, double margin,
                                         std::uint64_t seed);

/// Good iff every rendered rectangle has intensity >= 147 and lies inside
/// the central 80% of the canvas.
bool layout_rule(const core::PictureRecord& picture);

/// Scored-face pictures labeled by layout_rule, roughly balanced.
std::vector<core::PictureRecord> rule_labeled_layouts(std::size_t n, std::uint64_t seed);

/// Burst-structured dataset with face features, face labels from face_rule
/// and picture labels from face quality plus a position rule.
core::Dataset burst_dataset(std::size_t bursts, std::size_t pictures_per_burst, std::uint64_t seed);

}  // namespace robophoto::synth
