#include "robophoto/selection.hpp"

#include <algorithm>
#include <bit>
#include <unordered_set>

namespace robophoto::selection {

using core::BoundingBox;
using core::FaceCountCategory;

std::vector<BoundingBox> CropPlan::rectangles() const {
    std::vector<BoundingBox> all = steps;
    if (aspect_crop) all.push_back(*aspect_crop);
    return all;
}

namespace {

BoundingBox centered(int outer_w, int outer_h, int w, int h) {
    const int x = (outer_w - w) / 2;
    const int y = (outer_h - h) / 2;
    return {x, y, x + w, y + h};
}

}  // namespace

BoundingBox aspect_crop(const BoundingBox& outer) {
    const int w = outer.width();
    const int h = outer.height();
    int cw = w, ch = h;
    if (3LL * w >= 4LL * h) {
        cw = static_cast<int>((4LL * h) / 3);
        cw -= cw % 2;
    } else {
        ch = static_cast<int>((3LL * w) / 4);
    }
    const BoundingBox inner = centered(w, h, cw, ch);
    return {outer.x_tl + inner.x_tl, outer.y_tl + inner.y_tl, outer.x_tl + inner.x_br, outer.y_tl + inner.y_br};
}

CropPlan crop_cascade(int width, int height) {
    CropPlan plan;
    int w = width, h = height;
    for (int step = 0; step < kMaxCropSteps; ++step) {
        w -= kCropStepWidth;
        h -= kCropStepHeight;
        if (w < kMinCropWidth || h < kMinCropHeight) break;
        plan.steps.push_back(centered(width, height, w, h));
    }
    if (!plan.steps.empty()) plan.aspect_crop = aspect_crop(plan.steps.back());
    return plan;
}

core::PictureRecord crop_picture(const core::PictureRecord& picture, const BoundingBox& rect,
                                 const std::string& id_suffix) {
    core::PictureRecord out;
    out.picture_id = picture.picture_id + id_suffix;
    out.burst_id = picture.burst_id;
    out.width = rect.width();
    out.height = rect.height();
    out.label = picture.label;
    for (const auto& f : picture.faces) {
        BoundingBox b{std::max(f.bbox.x_tl, rect.x_tl) - rect.x_tl, std::max(f.bbox.y_tl, rect.y_tl) - rect.y_tl,
                      std::min(f.bbox.x_br, rect.x_br) - rect.x_tl, std::min(f.bbox.y_br, rect.y_br) - rect.y_tl};
        if (!b.valid()) continue;
        core::FaceObservation face = f;
        face.bbox = b;
        out.faces.push_back(std::move(face));
    }
    return out;
}

std::vector<std::string> SelectionResult::picture_ids() const {
    std::vector<std::string> ids;
    for (const auto& p : picks) ids.push_back(p.picture_id);
    return ids;
}

namespace {

std::size_t category_index(FaceCountCategory c) { return static_cast<std::size_t>(c); }

bool ranks_before(const ScoredPicture& a, const ScoredPicture& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.picture_id < b.picture_id;
}

}  // namespace

std::vector<FaceCountCategory> category_order(std::span<const ScoredPicture> candidates) {
    std::array<std::size_t, 3> counts{};
    for (const auto& c : candidates) ++counts[category_index(c.category)];
    std::vector<FaceCountCategory> order = {FaceCountCategory::ThreePlus, FaceCountCategory::Two,
                                            FaceCountCategory::One};
    std::stable_sort(order.begin(), order.end(), [&](FaceCountCategory a, FaceCountCategory b) {
        return counts[category_index(a)] < counts[category_index(b)];
    });
    return order;
}

SelectionResult select_best(std::span<const ScoredPicture> candidates, const SelectionConstraints& constraints) {
    SelectionResult result;
    result.order = category_order(candidates);
    std::unordered_set<std::string> used_bursts;
    for (FaceCountCategory category : result.order) {
        std::vector<const ScoredPicture*> pool;
        for (const auto& c : candidates)
            if (c.category == category) pool.push_back(&c);
        std::sort(pool.begin(), pool.end(), [](const ScoredPicture* a, const ScoredPicture* b) {
            return ranks_before(*a, *b);
        });
        std::size_t taken = 0;
        for (const ScoredPicture* c : pool) {
            if (taken == constraints.per_category_quota || result.picks.size() == constraints.total) break;
            if (constraints.one_per_burst && used_bursts.count(c->burst_id)) continue;
            used_bursts.insert(c->burst_id);
            result.picks.push_back(*c);
            ++taken;
        }
        result.shortfall[category_index(category)] = constraints.per_category_quota - taken;
    }
    return result;
}

std::vector<std::string> selection_oracle(std::span<const ScoredPicture> candidates,
                                          const SelectionConstraints& constraints) {
    if (candidates.size() > kOracleMaxCandidates)
        throw ArgumentError("selection_oracle: at most 20 candidates");

    // Category order recomputed from scratch.
    std::array<std::size_t, 3> counts{};
    for (const auto& c : candidates) ++counts[category_index(c.category)];
    std::vector<FaceCountCategory> order;
    for (std::size_t pass = 0; pass <= candidates.size(); ++pass)
        for (FaceCountCategory c : {FaceCountCategory::ThreePlus, FaceCountCategory::Two, FaceCountCategory::One})
            if (counts[category_index(c)] == pass) order.push_back(c);

    std::vector<std::string> selected;
    std::unordered_set<std::string> used_bursts;
    for (FaceCountCategory category : order) {
        std::vector<ScoredPicture> pool;
        for (const auto& c : candidates)
            if (c.category == category) pool.push_back(c);
        // Rank position = index after sorting, so comparing subsets by their
        // sorted index lists compares them by rank.
        std::sort(pool.begin(), pool.end(), ranks_before);
        const std::size_t room = std::min(constraints.per_category_quota, constraints.total - selected.size());

        std::vector<std::size_t> best;
        const std::uint32_t limit = 1u << pool.size();
        for (std::uint32_t mask = 0; mask < limit; ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) > room) continue;
            std::vector<std::size_t> members;
            std::unordered_set<std::string> bursts;
            bool feasible = true;
            for (std::size_t i = 0; i < pool.size() && feasible; ++i) {
                if (!(mask & (1u << i))) continue;
                if (constraints.one_per_burst &&
                    (used_bursts.count(pool[i].burst_id) || !bursts.insert(pool[i].burst_id).second))
                    feasible = false;
                members.push_back(i);
            }
            if (!feasible) continue;
            // Lexicographically smaller index list wins; a proper prefix loses
            // to its extension.
            bool better = false;
            const std::size_t common = std::min(members.size(), best.size());
            std::size_t k = 0;
            while (k < common && members[k] == best[k]) ++k;
            if (k < common)
                better = members[k] < best[k];
            else
                better = members.size() > best.size();
            if (better) best = members;
        }
        for (std::size_t i : best) {
            selected.push_back(pool[i].picture_id);
            used_bursts.insert(pool[i].burst_id);
        }
    }
    return selected;
}

nlohmann::json selection_report(const std::string& method, const SelectionResult& result) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < result.picks.size(); ++i) {
        const auto& p = result.picks[i];
        out.push_back({{"method", method},
                       {"picture_id", p.picture_id},
                       {"burst_id", p.burst_id},
                       {"category", core::to_string(p.category)},
                       {"score", p.score},
                       {"rank", i + 1}});
    }
    return out;
}

}  // namespace robophoto::selection
