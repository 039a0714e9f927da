#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gapfill {

enum class VarKind { CategoricalInt, Numeric, Binary };

std::string to_string(VarKind kind);
VarKind var_kind_from_string(const std::string& s);

struct VariableSpec {
    std::string name;
    VarKind kind = VarKind::Numeric;
    double lo = 0.0;
    double hi = 1.0;
};

// Ordered variable list with inclusive [lo, hi] bounds. Binary variables are
// pinned to {0, 1}; all other kinds require lo < hi. Names must be unique.
class VariableSchema {
public:
    VariableSchema() = default;
    explicit VariableSchema(std::vector<VariableSpec> variables);

    std::size_t arity() const { return variables_.size(); }
    const VariableSpec& at(std::size_t i) const { return variables_.at(i); }
    const std::vector<VariableSpec>& variables() const { return variables_; }

    // -1 when absent
    int index_of(const std::string& name) const;

private:
    std::vector<VariableSpec> variables_;
};

// The ten survey variables with their bounds. Province/Region/Race carry
// integer codes; bounds for those three are this artifact's choice since the
// source only declares them "Integers".
VariableSchema survey_schema();

// One row; absent optional = missing value. Present values are in original
// (un-normalized) units unless the owning Dataset says otherwise.
struct Record {
    std::vector<std::optional<double>> values;

    bool complete() const;
    std::vector<int> missing_indices() const;
};

struct Dataset {
    VariableSchema schema;
    std::vector<Record> records;
    bool normalized = false;

    std::size_t size() const { return records.size(); }
};

// Per-variable (x_min, x_max) pairs for the affine [0,1] map.
struct NormalizationParams {
    std::vector<std::pair<double, double>> ranges;

    static NormalizationParams from_schema(const VariableSchema& schema);
};

struct ValidationResult {
    bool valid = true;
    std::vector<std::string> reasons;
};

// CSV I/O. Missing values are empty fields or "?"; the header row must match
// the schema names in order.
Dataset load_csv(const std::string& path, const VariableSchema& schema);
void save_csv(const Dataset& d, const std::string& path);

// Schema file: one variable per line, `name kind lo hi`.
VariableSchema load_schema(const std::string& path);
void save_schema(const VariableSchema& schema, const std::string& path);

// Range checks on every present value plus the cross-field rule
// parity <= gravidity (applied when the schema has both variables and the
// record has both values).
ValidationResult validate_record(const Record& r, const VariableSchema& schema);

// Keeps only records that are fully present and valid. Throws DataError when
// nothing survives.
Dataset listwise_clean(const Dataset& d);

Dataset normalize(const Dataset& d, const NormalizationParams& p);
Dataset denormalize(const Dataset& d, const NormalizationParams& p);

struct SplitFractions {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

// Seeded shuffle, floor allocations for validation/test, remainder to train.
std::array<Dataset, 3> split_dataset(const Dataset& d, const SplitFractions& fractions,
                                     std::uint64_t seed);

}  // namespace gapfill
