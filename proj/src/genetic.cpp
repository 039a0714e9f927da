#include "gapfill/genetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gapfill/errors.hpp"

namespace gapfill {

namespace {

void check_config(const GaConfig& cfg) {
    if (cfg.population_size < 2) throw ConfigError("GA population_size must be >= 2");
    if (cfg.generations < 1) throw ConfigError("GA generations must be >= 1");
    if (cfg.crossover_rate < 0 || cfg.crossover_rate > 1)
        throw ConfigError("GA crossover_rate must be in [0, 1]");
    if (cfg.mutation_rate < 0 || cfg.mutation_rate > 1)
        throw ConfigError("GA mutation_rate must be in [0, 1]");
    if (cfg.elitism < 0 || cfg.elitism >= cfg.population_size)
        throw ConfigError("GA elitism must be in [0, population_size)");
}

void check_bounds(const GeneBounds& b) {
    for (const auto& [lo, hi] : b.bounds) {
        if (lo > hi) throw ConfigError("gene bounds need lo <= hi");
        if (lo < 0.0 || hi > 1.0) throw ConfigError("gene bounds must lie in [0, 1]");
    }
}

// population order sorted best-first, ties by index
std::vector<std::size_t> ranking(const std::vector<Individual>& pop) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *pop[a].fitness > *pop[b].fitness;
    });
    return order;
}

}  // namespace

GeneBounds GeneBounds::full(std::size_t n_genes) {
    GeneBounds b;
    b.bounds.assign(n_genes, {0.0, 1.0});
    return b;
}

FitnessContext FitnessContext::from_record(const AutoencoderModel& model,
                                           const Record& normalized) {
    FitnessContext ctx;
    ctx.model = &model;
    ctx.known_values = normalized.values;
    ctx.missing_indices = normalized.missing_indices();
    if (ctx.missing_indices.empty())
        throw DataError("record has no missing values to estimate");
    return ctx;
}

double ga_fitness(const FitnessContext& ctx, std::span<const double> genes) {
    if (genes.size() != ctx.missing_indices.size())
        throw DataError("gene count does not match missing-variable count");

    std::vector<double> x(ctx.known_values.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = ctx.known_values[i] ? *ctx.known_values[i] : 0.0;
    for (std::size_t g = 0; g < genes.size(); ++g)
        x[static_cast<std::size_t>(ctx.missing_indices[g])] = genes[g];

    auto y = forward(*ctx.model, x);
    double err = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double e = x[j] - y[j];
        err += e * e;
    }
    if (!std::isfinite(err)) throw NumericError("non-finite reconstruction error");
    return -err;
}

std::vector<Individual> init_population(const GaConfig& cfg, const GeneBounds& bounds,
                                        std::size_t n_genes, Rng& rng) {
    check_config(cfg);
    check_bounds(bounds);
    if (n_genes < 1) throw ConfigError("need at least one gene");
    if (bounds.bounds.size() != n_genes)
        throw ConfigError("bounds cover " + std::to_string(bounds.bounds.size()) +
                          " genes, expected " + std::to_string(n_genes));

    std::vector<Individual> pop(cfg.population_size);
    for (auto& ind : pop) {
        ind.genes.resize(n_genes);
        for (std::size_t g = 0; g < n_genes; ++g) {
            auto [lo, hi] = bounds.bounds[g];
            ind.genes[g] = (lo == hi) ? lo : rng.uniform(lo, hi);
        }
    }
    return pop;
}

std::pair<std::size_t, std::size_t> select_parents(const std::vector<Individual>& population,
                                                   Rng& rng) {
    const std::size_t n = population.size();
    if (n < 2) throw ConfigError("selection needs at least 2 individuals");
    for (const auto& ind : population)
        if (!ind.fitness) throw DataError("selection requires evaluated fitnesses");

    auto order = ranking(population);  // order[rank] = index, weight for rank r is n - r
    std::vector<double> weight(n);
    for (std::size_t r = 0; r < n; ++r) weight[r] = static_cast<double>(n - r);

    auto draw = [&](std::size_t skip_rank) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            if (r != skip_rank) total += weight[r];
        double t = rng.uniform() * total;
        double acc = 0.0;
        std::size_t chosen = (skip_rank == 0) ? 1 : 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == skip_rank) continue;
            acc += weight[r];
            if (t < acc) {
                chosen = r;
                break;
            }
        }
        return chosen;
    };

    std::size_t first = draw(n);  // n = no rank skipped
    std::size_t second = draw(first);
    return {order[first], order[second]};
}

std::pair<Individual, Individual> simple_crossover(const Individual& a, const Individual& b,
                                                   Rng& rng) {
    if (a.genes.size() != b.genes.size())
        throw DataError("crossover parents have different gene counts");
    const std::size_t n = a.genes.size();
    Individual c1, c2;
    c1.genes = a.genes;
    c2.genes = b.genes;
    if (n >= 2) {
        std::size_t k = 1 + static_cast<std::size_t>(rng.below(n - 1));  // cut in {1..n-1}
        for (std::size_t i = k; i < n; ++i) {
            c1.genes[i] = b.genes[i];
            c2.genes[i] = a.genes[i];
        }
    }
    return {std::move(c1), std::move(c2)};
}

Individual boundary_mutation(const Individual& ind, const GeneBounds& bounds, double rate,
                             Rng& rng) {
    if (bounds.bounds.size() != ind.genes.size())
        throw ConfigError("bounds do not match gene count");
    Individual out = ind;
    bool changed = false;
    for (std::size_t g = 0; g < out.genes.size(); ++g) {
        if (rng.uniform() >= rate) continue;
        auto [lo, hi] = bounds.bounds[g];
        double v = rng.uniform() < 0.5 ? lo : hi;
        if (v != out.genes[g]) changed = true;
        out.genes[g] = v;
    }
    if (changed) out.fitness.reset();
    return out;
}

EvolveResult evolve(const FitnessContext& ctx, const GaConfig& cfg, const GeneBounds& bounds) {
    check_config(cfg);
    check_bounds(bounds);
    const std::size_t n_genes = ctx.missing_indices.size();
    if (bounds.bounds.size() != n_genes)
        throw ConfigError("bounds cover " + std::to_string(bounds.bounds.size()) +
                          " genes but the record has " + std::to_string(n_genes) + " missing");

    Rng rng(cfg.seed);
    auto pop = init_population(cfg, bounds, n_genes, rng);

    EvolveResult result;
    result.best_fitness = -std::numeric_limits<double>::infinity();
    result.history.reserve(cfg.generations);

    for (int gen = 0; gen < cfg.generations; ++gen) {
        for (auto& ind : pop)
            if (!ind.fitness) ind.fitness = ga_fitness(ctx, ind.genes);

        auto order = ranking(pop);
        const Individual& best = pop[order[0]];
        result.history.push_back(*best.fitness);
        if (*best.fitness > result.best_fitness) {
            result.best_fitness = *best.fitness;
            result.best_genes = best.genes;
        }
        if (gen + 1 == cfg.generations) break;

        std::vector<Individual> next;
        next.reserve(pop.size());
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[e]]);
        while (next.size() < pop.size()) {
            auto [i, j] = select_parents(pop, rng);
            Individual c1, c2;
            if (rng.uniform() < cfg.crossover_rate) {
                std::tie(c1, c2) = simple_crossover(pop[i], pop[j], rng);
            } else {
                c1 = pop[i];
                c2 = pop[j];
            }
            c1 = boundary_mutation(c1, bounds, cfg.mutation_rate, rng);
            next.push_back(std::move(c1));
            if (next.size() < pop.size()) {
                c2 = boundary_mutation(c2, bounds, cfg.mutation_rate, rng);
                next.push_back(std::move(c2));
            }
        }
        pop = std::move(next);
    }
    return result;
}

}  // namespace gapfill
