#include "gapfill/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "gapfill/errors.hpp"
#include "gapfill/rng.hpp"

namespace gapfill {

std::string to_string(VarKind kind) {
    switch (kind) {
        case VarKind::CategoricalInt: return "categorical-int";
        case VarKind::Numeric: return "numeric";
        case VarKind::Binary: return "binary";
    }
    return "unknown";
}

VarKind var_kind_from_string(const std::string& s) {
    if (s == "categorical-int") return VarKind::CategoricalInt;
    if (s == "numeric") return VarKind::Numeric;
    if (s == "binary") return VarKind::Binary;
    throw DataError("unknown variable kind: " + s);
}

VariableSchema::VariableSchema(std::vector<VariableSpec> variables)
    : variables_(std::move(variables)) {
    std::unordered_set<std::string> seen;
    for (const auto& v : variables_) {
        if (!seen.insert(v.name).second)
            throw DataError("duplicate variable name: " + v.name);
        if (v.kind == VarKind::Binary) {
            if (v.lo != 0.0 || v.hi != 1.0)
                throw DataError("binary variable " + v.name + " must have bounds [0, 1]");
        } else if (!(v.lo < v.hi)) {
            throw DataError("variable " + v.name + " needs lo < hi");
        }
    }
}

int VariableSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].name == name) return static_cast<int>(i);
    return -1;
}

VariableSchema survey_schema() {
    return VariableSchema({
        {"Province", VarKind::CategoricalInt, 1, 9},
        {"Region", VarKind::CategoricalInt, 1, 899},
        {"Age", VarKind::Numeric, 15, 50},
        {"Race", VarKind::CategoricalInt, 1, 5},
        {"Education", VarKind::Numeric, 0, 13},
        {"Gravidity", VarKind::Numeric, 0, 8},
        {"Parity", VarKind::Numeric, 0, 7},
        {"FatherAge", VarKind::Numeric, 16, 65},
        {"HIV", VarKind::Binary, 0, 1},
        {"RPR", VarKind::Binary, 0, 1},
    });
}

bool Record::complete() const {
    return std::all_of(values.begin(), values.end(),
                       [](const auto& v) { return v.has_value(); });
}

std::vector<int> Record::missing_indices() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!values[i].has_value()) idx.push_back(static_cast<int>(i));
    return idx;
}

NormalizationParams NormalizationParams::from_schema(const VariableSchema& schema) {
    NormalizationParams p;
    p.ranges.reserve(schema.arity());
    for (const auto& v : schema.variables()) p.ranges.emplace_back(v.lo, v.hi);
    return p;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    return *end == '\0';
}

// compact when integral, full precision otherwise; keeps files stable across runs
std::string format_value(double v) {
    double r = std::round(v);
    if (std::abs(v - r) < 1e-9 && std::abs(r) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(r));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Dataset load_csv(const std::string& path, const VariableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);

    auto header = split_fields(trim(line), ',');
    if (header.size() != schema.arity())
        throw DataError(path + ": header has " + std::to_string(header.size()) +
                        " columns, expected " + std::to_string(schema.arity()));
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) != schema.at(i).name)
            throw DataError(path + ": header column " + std::to_string(i + 1) + " is '" +
                            trim(header[i]) + "', expected '" + schema.at(i).name + "'");
    }

    Dataset d;
    d.schema = schema;
    d.normalized = false;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto fields = split_fields(t, ',');
        if (fields.size() != schema.arity())
            throw DataError(path + ":" + std::to_string(line_no) + ": " +
                            std::to_string(fields.size()) + " columns where " +
                            std::to_string(schema.arity()) + " expected");
        Record r;
        r.values.resize(schema.arity());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            std::string f = trim(fields[i]);
            if (f.empty() || f == "?") continue;  // missing
            double v;
            if (!parse_double(f, v))
                throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric value '" +
                                f + "' in column " + schema.at(i).name);
            r.values[i] = v;
        }
        d.records.push_back(std::move(r));
    }
    return d;
}

void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path);
    for (std::size_t i = 0; i < d.schema.arity(); ++i) {
        if (i) out << ',';
        out << d.schema.at(i).name;
    }
    out << '\n';
    for (const auto& r : d.records) {
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            if (i) out << ',';
            if (r.values[i]) out << format_value(*r.values[i]);
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

VariableSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    std::vector<VariableSpec> vars;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ss(t);
        VariableSpec v;
        std::string kind;
        if (!(ss >> v.name >> kind >> v.lo >> v.hi))
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected `name kind lo hi`");
        v.kind = var_kind_from_string(kind);
        vars.push_back(std::move(v));
    }
    return VariableSchema(std::move(vars));
}

void save_schema(const VariableSchema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file: " + path);
    for (const auto& v : schema.variables())
        out << v.name << ' ' << to_string(v.kind) << ' ' << format_value(v.lo) << ' '
            << format_value(v.hi) << '\n';
}

ValidationResult validate_record(const Record& r, const VariableSchema& schema) {
    ValidationResult res;
    if (r.values.size() != schema.arity()) {
        res.valid = false;
        res.reasons.push_back("record has " + std::to_string(r.values.size()) +
                              " values, schema arity is " + std::to_string(schema.arity()));
        return res;
    }
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (!r.values[i]) continue;
        const auto& spec = schema.at(i);
        double v = *r.values[i];
        if (v < spec.lo)
            res.reasons.push_back(spec.name + " = " + format_value(v) + " below lower bound " +
                                  format_value(spec.lo));
        else if (v > spec.hi)
            res.reasons.push_back(spec.name + " = " + format_value(v) + " above upper bound " +
                                  format_value(spec.hi));
    }
    int g = schema.index_of("Gravidity");
    int p = schema.index_of("Parity");
    if (g >= 0 && p >= 0 && r.values[g] && r.values[p] && *r.values[p] > *r.values[g])
        res.reasons.push_back("Parity " + format_value(*r.values[p]) + " exceeds Gravidity " +
                              format_value(*r.values[g]));
    res.valid = res.reasons.empty();
    return res;
}

Dataset listwise_clean(const Dataset& d) {
    Dataset out;
    out.schema = d.schema;
    out.normalized = d.normalized;
    for (const auto& r : d.records)
        if (r.complete() && validate_record(r, d.schema).valid) out.records.push_back(r);
    if (out.records.empty())
        throw DataError("listwise deletion left no complete records; cannot train");
    return out;
}

Dataset normalize(const Dataset& d, const NormalizationParams& p) {
    if (d.normalized) throw DataError("dataset already normalized");
    if (p.ranges.size() != d.schema.arity())
        throw DataError("normalization params cover " + std::to_string(p.ranges.size()) +
                        " variables, schema has " + std::to_string(d.schema.arity()));
    for (const auto& [lo, hi] : p.ranges)
        if (!(hi > lo)) throw DataError("normalization range needs x_max > x_min");

    Dataset out = d;
    out.normalized = true;
    for (std::size_t ri = 0; ri < out.records.size(); ++ri) {
        auto& r = out.records[ri];
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            if (!r.values[i]) continue;
            auto [lo, hi] = p.ranges[i];
            double v = *r.values[i];
            if (v < lo || v > hi)
                throw DataError("record " + std::to_string(ri) + ", variable " +
                                d.schema.at(i).name + ": value " + format_value(v) +
                                " outside [" + format_value(lo) + ", " + format_value(hi) + "]");
            r.values[i] = (v - lo) / (hi - lo);
        }
    }
    return out;
}

Dataset denormalize(const Dataset& d, const NormalizationParams& p) {
    if (!d.normalized) throw DataError("dataset is not normalized");
    if (p.ranges.size() != d.schema.arity())
        throw DataError("normalization params do not match schema arity");

    Dataset out = d;
    out.normalized = false;
    for (auto& r : out.records) {
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            if (!r.values[i]) continue;
            auto [lo, hi] = p.ranges[i];
            r.values[i] = lo + *r.values[i] * (hi - lo);
        }
    }
    return out;
}

std::array<Dataset, 3> split_dataset(const Dataset& d, const SplitFractions& f,
                                     std::uint64_t seed) {
    if (f.train <= 0 || f.validation <= 0 || f.test <= 0)
        throw ConfigError("split fractions must be positive");
    if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");

    std::size_t n = d.records.size();
    auto n_val = static_cast<std::size_t>(std::floor(n * f.validation));
    auto n_test = static_cast<std::size_t>(std::floor(n * f.test));
    if (n_val + n_test >= n) throw ConfigError("dataset too small to split");
    std::size_t n_train = n - n_val - n_test;
    if (n_train == 0 || n_val == 0 || n_test == 0)
        throw ConfigError("a split would be empty with " + std::to_string(n) + " records");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    auto take = [&](std::size_t begin, std::size_t count) {
        Dataset part;
        part.schema = d.schema;
        part.normalized = d.normalized;
        part.records.reserve(count);
        for (std::size_t i = begin; i < begin + count; ++i)
            part.records.push_back(d.records[order[i]]);
        return part;
    };
    return {take(0, n_train), take(n_train, n_val), take(n_train + n_val, n_test)};
}

}  // namespace gapfill
