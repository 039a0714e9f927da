#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gapfill/autoencoder.hpp"
#include "gapfill/rng.hpp"
#include "gapfill/schema.hpp"

namespace gapfill {

struct GaConfig {
    int population_size = 15;
    int generations = 10;
    double crossover_rate = 0.8;
    double mutation_rate = 0.1;
    int elitism = 1;
    std::uint64_t seed = 0;
};

// Per-gene [lo, hi] in normalized units.
struct GeneBounds {
    std::vector<std::pair<double, double>> bounds;

    static GeneBounds full(std::size_t n_genes);  // [0,1] everywhere
};

struct Individual {
    std::vector<double> genes;
    std::optional<double> fitness;
};

// Read-only evaluation context: the trained model plus the known components
// of one normalized record.
struct FitnessContext {
    const AutoencoderModel* model = nullptr;
    std::vector<std::optional<double>> known_values;  // present exactly at non-missing slots
    std::vector<int> missing_indices;

    static FitnessContext from_record(const AutoencoderModel& model, const Record& normalized);
};

// Negated squared reconstruction error of the candidate-completed record,
// summed over all components. Always <= 0; 0 only at a fixed point of the
// network.
double ga_fitness(const FitnessContext& ctx, std::span<const double> genes);

std::vector<Individual> init_population(const GaConfig& cfg, const GeneBounds& bounds,
                                        std::size_t n_genes, Rng& rng);

// Linear rank selection, two draws without replacement. All fitnesses must be
// evaluated; ranks tie-break by index. Returns indices into the population.
std::pair<std::size_t, std::size_t> select_parents(const std::vector<Individual>& population,
                                                   Rng& rng);

// One-point crossover; with a single gene there is no interior cut and the
// children are copies of the parents.
std::pair<Individual, Individual> simple_crossover(const Individual& a, const Individual& b,
                                                   Rng& rng);

// Each gene independently jumps to lo or hi of its bound with the given rate.
Individual boundary_mutation(const Individual& ind, const GeneBounds& bounds, double rate,
                             Rng& rng);

struct EvolveResult {
    std::vector<double> best_genes;
    double best_fitness = 0.0;
    std::vector<double> history;  // best fitness per generation
};

EvolveResult evolve(const FitnessContext& ctx, const GaConfig& cfg, const GeneBounds& bounds);

}  // namespace gapfill
