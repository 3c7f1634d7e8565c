#include "robophoto/threshold_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "robophoto/rng.hpp"

namespace robophoto::thresholds {

using composition::FaceGeometry;

std::size_t genome_length(ThresholdKind kind) { return kind == ThresholdKind::Baseline ? 6 : 8; }

Genome to_genome(const ThresholdSet& set) {
    const auto& b = set.values.baseline;
    Genome g = {b.x_min, b.x_max, b.y_min, b.y_max, b.occ_min, b.occ_max};
    if (set.kind == ThresholdKind::Heuristic) {
        g.push_back(set.values.r_min);
        g.push_back(set.values.p_min);
    }
    return g;
}

ThresholdSet from_genome(ThresholdKind kind, const Genome& g) {
    if (g.size() != genome_length(kind)) throw ArgumentError("genome length does not match threshold kind");
    ThresholdSet set;
    set.kind = kind;
    set.values.baseline = {g[0], g[1], g[2], g[3], g[4], g[5]};
    if (kind == ThresholdKind::Heuristic) {
        set.values.r_min = g[6];
        set.values.p_min = g[7];
    }
    return set;
}

void repair(Genome& g) {
    for (double& v : g) v = std::clamp(v, 0.0, 1.0);
    for (std::size_t k = 0; k + 1 < 6 && k + 1 < g.size(); k += 2) {
        if (g[k] > g[k + 1]) std::swap(g[k], g[k + 1]);
        if (g[k] == g[k + 1]) {
            if (g[k + 1] < 1.0)
                g[k + 1] = std::min(1.0, g[k + 1] + 1e-9);
            else
                g[k] -= 1e-9;
        }
    }
}

core::Quality classify_with_thresholds(const core::PictureRecord& picture, const ThresholdSet& t) {
    const bool passed = t.kind == ThresholdKind::Baseline ? composition::baseline_score(picture, t.values.baseline).passed
                                                          : composition::heuristic_score(picture, t.values).passed;
    return passed ? core::Quality::Good : core::Quality::Bad;
}

double accuracy(const ThresholdSet& thresholds, const core::Dataset& dataset) {
    std::size_t labeled = 0, correct = 0;
    for (const auto& p : dataset.records) {
        if (!p.label) continue;
        ++labeled;
        if (classify_with_thresholds(p, thresholds) == *p.label) ++correct;
    }
    if (labeled == 0) throw ArgumentError("accuracy: no labeled pictures");
    return static_cast<double>(correct) / static_cast<double>(labeled);
}

FitnessEvaluator::FitnessEvaluator(const core::Dataset& dataset, ThresholdKind kind) : kind_(kind) {
    offsets_.push_back(0);
    for (const auto& p : dataset.records) {
        if (!p.label) continue;
        for (const auto& f : p.faces) {
            faces_.push_back(composition::face_geometry(f.bbox, p.width, p.height));
            if (kind == ThresholdKind::Heuristic) {
                if (!f.score) throw composition::MissingFaceScore();
                scores_.push_back(*f.score);
            }
        }
        offsets_.push_back(faces_.size());
        labels_.push_back(*p.label == core::Quality::Good);
    }
    if (labels_.empty()) throw ArgumentError("fitness: no labeled pictures");
}

double FitnessEvaluator::accuracy(const Genome& g) const {
    const composition::BaselineThresholds t{g[0], g[1], g[2], g[3], g[4], g[5]};
    const bool heuristic = kind_ == ThresholdKind::Heuristic;
    const double r_min = heuristic ? g[6] : 0.0;
    const double p_min = heuristic ? g[7] : 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const std::size_t begin = offsets_[i], end = offsets_[i + 1];
        bool good = end > begin;
        std::size_t good_faces = 0;
        for (std::size_t f = begin; good && f < end; ++f) {
            good = composition::passes(faces_[f], t);
            if (heuristic && scores_[f] > r_min) ++good_faces;
        }
        if (good && heuristic)
            good = static_cast<double>(good_faces) / static_cast<double>(end - begin) > p_min;
        if (good == labels_[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels_.size());
}

void GAConfig::validate() const {
    if (population_size < 2) throw ArgumentError("population_size must be >= 2");
    if (elitism_count >= population_size) throw ArgumentError("elitism_count must be < population_size");
    if (tournament_size < 1) throw ArgumentError("tournament_size must be >= 1");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ArgumentError("crossover_rate must be in [0,1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ArgumentError("mutation_rate must be in [0,1]");
    if (!(mutation_sigma >= 0.0)) throw ArgumentError("mutation_sigma must be >= 0");
}

namespace {

double squared_norm(const Genome& g) { return std::inner_product(g.begin(), g.end(), g.begin(), 0.0); }

}  // namespace

bool fitter(double acc_a, const Genome& a, double acc_b, const Genome& b) {
    if (acc_a != acc_b) return acc_a > acc_b;
    const double na = squared_norm(a), nb = squared_norm(b);
    if (na != nb) return na < nb;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

FitnessReport ga_optimize(const core::Dataset& train, ThresholdKind kind, const GAConfig& config) {
    config.validate();
    const FitnessEvaluator evaluator(train, kind);
    const std::size_t dims = genome_length(kind);
    Rng rng(config.seed);

    std::vector<Genome> population;
    for (const auto& g : config.initial_population) {
        if (population.size() == config.population_size) break;
        if (g.size() != dims) throw ArgumentError("initial genome has wrong length");
        Genome copy = g;
        repair(copy);
        population.push_back(std::move(copy));
    }
    while (population.size() < config.population_size) {
        Genome g(dims);
        for (double& v : g) v = rng.uniform();
        repair(g);
        population.push_back(std::move(g));
    }

    FitnessReport report;
    std::vector<double> fitness(population.size());
    auto evaluate_all = [&] {
        for (std::size_t i = 0; i < population.size(); ++i) fitness[i] = evaluator.accuracy(population[i]);
        report.evaluations += population.size();
    };
    std::vector<std::size_t> ranking(population.size());
    auto rank_population = [&] {
        std::iota(ranking.begin(), ranking.end(), 0);
        std::stable_sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
            return fitter(fitness[a], population[a], fitness[b], population[b]);
        });
    };
    auto record = [&](std::size_t generation) {
        const std::size_t top = ranking.front();
        if (report.best_genome.empty() ||
            fitter(fitness[top], population[top], report.best_accuracy, report.best_genome)) {
            report.best_accuracy = fitness[top];
            report.best_genome = population[top];
        }
        const double mean =
            std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(fitness.size());
        report.curve.push_back({generation, report.best_accuracy, mean});
    };
    auto tournament = [&]() -> const Genome& {
        std::size_t winner = static_cast<std::size_t>(rng.below(population.size()));
        for (std::size_t k = 1; k < config.tournament_size; ++k) {
            const std::size_t c = static_cast<std::size_t>(rng.below(population.size()));
            if (fitter(fitness[c], population[c], fitness[winner], population[winner])) winner = c;
        }
        return population[winner];
    };

    evaluate_all();
    rank_population();
    record(0);

    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        std::vector<Genome> next;
        next.reserve(population.size());
        for (std::size_t e = 0; e < config.elitism_count; ++e) next.push_back(population[ranking[e]]);
        while (next.size() < population.size()) {
            const Genome& a = tournament();
            const Genome& b = tournament();
            Genome child = a;
            if (rng.uniform() < config.crossover_rate)
                for (std::size_t k = 0; k < dims; ++k)
                    if (rng.uniform() < 0.5) child[k] = b[k];
            for (std::size_t k = 0; k < dims; ++k)
                if (rng.uniform() < config.mutation_rate) child[k] += config.mutation_sigma * rng.normal();
            repair(child);
            next.push_back(std::move(child));
        }
        population = std::move(next);
        evaluate_all();
        rank_population();
        record(gen);
    }
    report.best_thresholds = from_genome(kind, report.best_genome);
    return report;
}

FitnessReport grid_search_oracle(const core::Dataset& train, ThresholdKind kind, std::size_t steps_per_axis) {
    if (steps_per_axis < 2) throw ArgumentError("grid needs at least 2 steps per axis");
    const std::size_t dims = genome_length(kind);
    double total = 1.0;
    for (std::size_t k = 0; k < dims; ++k) total *= static_cast<double>(steps_per_axis);
    if (total > static_cast<double>(kMaxGridPoints))
        throw ArgumentError("grid of " + std::to_string(static_cast<unsigned long long>(total)) +
                            " points exceeds the limit of " + std::to_string(kMaxGridPoints));

    const FitnessEvaluator evaluator(train, kind);
    std::vector<double> axis(steps_per_axis);
    for (std::size_t i = 0; i < steps_per_axis; ++i)
        axis[i] = static_cast<double>(i) / static_cast<double>(steps_per_axis - 1);

    FitnessReport report;
    std::vector<std::size_t> index(dims, 0);
    Genome g(dims, axis[0]);
    double best = -1.0;
    while (true) {
        const double acc = evaluator.accuracy(g);
        ++report.evaluations;
        if (acc > best) {
            best = acc;
            report.best_genome = g;
        }
        // Odometer with the last gene fastest: lexicographic genome order.
        std::size_t k = dims;
        while (k > 0) {
            --k;
            if (++index[k] < steps_per_axis) {
                g[k] = axis[index[k]];
                break;
            }
            index[k] = 0;
            g[k] = axis[0];
            if (k == 0) {
                k = dims + 1;  // wrapped past the first gene
                break;
            }
        }
        if (k == dims + 1) break;
    }
    report.best_accuracy = best;
    report.best_thresholds = from_genome(kind, report.best_genome);
    report.curve.push_back({0, best, best});
    return report;
}

void write_curve_csv(std::ostream& out, const std::vector<GenerationStats>& curve) {
    out << "generation,best,mean\n";
    for (const auto& s : curve) out << s.generation << ',' << s.best << ',' << s.mean << '\n';
}

}  // namespace robophoto::thresholds
