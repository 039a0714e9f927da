#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gapfill/schema.hpp"

namespace gapfill {

// Stand-in for the survey data: complete records with learnable structure
// (education, gravidity, father's age and the serostatus rates all depend on
// age; region nests inside province; parity never exceeds gravidity).
struct SynthConfig {
    int n_records = 5000;
    std::uint64_t seed = 1;
    double noise_scale = 1.0;
    double missing_fraction = 0.2;
    int missing_variable = 4;  // Education
    int mar_driver = 2;        // Age
};

struct TruthEntry {
    std::size_t record_index = 0;
    int variable = -1;
    double true_value = 0.0;
};

Dataset generate(const SynthConfig& cfg, const VariableSchema& schema);

// Blanks cfg.missing_variable in exactly round(fraction * n) records, chosen
// without replacement with inclusion weight logistic in the normalized
// mar_driver value. Returns the blanked dataset and the ground truth.
std::pair<Dataset, std::vector<TruthEntry>> inject_mar(const Dataset& d, const SynthConfig& cfg);

// Truth CSV: record_index, variable name, true value.
void save_truth(const std::vector<TruthEntry>& truth, const VariableSchema& schema,
                const std::string& path);
std::vector<TruthEntry> load_truth(const std::string& path, const VariableSchema& schema);

}  // namespace gapfill
