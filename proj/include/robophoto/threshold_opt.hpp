#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "robophoto/composition.hpp"
#include "robophoto/core.hpp"

namespace robophoto::thresholds {

using composition::ThresholdKind;
using composition::ThresholdSet;

/// Genome layout: x_min, x_max, y_min, y_max, occ_min, occ_max[, r_min, p_min].
using Genome = std::vector<double>;

std::size_t genome_length(ThresholdKind kind);
Genome to_genome(const ThresholdSet& set);
/// No validation: grid points may hold min >= max pairs.
ThresholdSet from_genome(ThresholdKind kind, const Genome& genome);

/// Clamps to [0,1] and orders each (min,max) pair; equal pairs are split by 1e-9.
void repair(Genome& genome);

/// Good iff the picture passes the scorer's gate. Heuristic requires face scores.
core::Quality classify_with_thresholds(const core::PictureRecord& picture, const ThresholdSet& thresholds);

/// Share of labeled pictures classified correctly. Throws ArgumentError when
/// no picture is labeled.
double accuracy(const ThresholdSet& thresholds, const core::Dataset& dataset);

/// Labeled pictures reduced to the normalized face quantities the gates
/// read, so a genome can be scored without touching the records.
class FitnessEvaluator {
public:
    FitnessEvaluator(const core::Dataset& dataset, ThresholdKind kind);

    double accuracy(const Genome& genome) const;
    std::size_t size() const { return labels_.size(); }
    ThresholdKind kind() const { return kind_; }

private:
    ThresholdKind kind_;
    std::vector<std::size_t> offsets_;  // face range per picture
    std::vector<composition::FaceGeometry> faces_;
    std::vector<double> scores_;
    std::vector<bool> labels_;  // true = Good
};

struct GAConfig {
    std::size_t population_size = 64;
    std::size_t generations = 100;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;
    double mutation_sigma = 0.05;
    std::size_t elitism_count = 2;
    std::size_t tournament_size = 3;
    std::uint64_t seed = 0;
    /// Optional starting genomes; the remainder is drawn uniformly.
    std::vector<Genome> initial_population;

    void validate() const;
};

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;
    double mean = 0.0;
};

struct FitnessReport {
    ThresholdSet best_thresholds;
    Genome best_genome;
    double best_accuracy = 0.0;
    std::vector<GenerationStats> curve;
    std::size_t evaluations = 0;
};

/// True when genome a ranks strictly ahead of b: higher accuracy, then
/// smaller L2 norm, then lexicographically smaller.
bool fitter(double acc_a, const Genome& a, double acc_b, const Genome& b);

/// Elitist genetic algorithm (tournament selection, uniform crossover,
/// Gaussian mutation). Heuristic fitting requires face scores on every face.
FitnessReport ga_optimize(const core::Dataset& train, ThresholdKind kind, const GAConfig& config);

inline constexpr std::uint64_t kMaxGridPoints = 10'000'000;

/// Exhaustive search over {0, 1/(s-1), ..., 1}^dims in lexicographic order;
/// the first maximum wins. Refuses grids above kMaxGridPoints.
FitnessReport grid_search_oracle(const core::Dataset& train, ThresholdKind kind, std::size_t steps_per_axis);

/// CSV with header "generation,best,mean".
void write_curve_csv(std::ostream& out, const std::vector<GenerationStats>& curve);

}  // namespace robophoto::thresholds
