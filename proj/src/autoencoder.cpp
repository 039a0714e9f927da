#include "gapfill/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gapfill/errors.hpp"
#include "gapfill/rng.hpp"

namespace gapfill {

namespace {

void check_training_data(const Dataset& d, const char* which) {
    if (d.records.empty()) throw DataError(std::string(which) + " dataset is empty");
    if (!d.normalized) throw DataError(std::string(which) + " dataset is not normalized");
    for (const auto& r : d.records)
        if (!r.complete())
            throw DataError(std::string(which) + " dataset contains missing values");
}

void check_dims(const AutoencoderModel& m) {
    const auto& c = m.config;
    if (m.w1.size() != static_cast<std::size_t>(c.n_hidden * c.n_in) ||
        m.b1.size() != static_cast<std::size_t>(c.n_hidden) ||
        m.w2.size() != static_cast<std::size_t>(c.n_out * c.n_hidden) ||
        m.b2.size() != static_cast<std::size_t>(c.n_out))
        throw DataError("model weight shapes do not match its config");
}

double mse_on_matrix(const AutoencoderModel& m, const double* x, std::size_t n) {
    const int ni = m.config.n_in, nh = m.config.n_hidden, no = m.config.n_out;
    double sum = 0.0;
    std::vector<double> h(nh);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x + r * ni;
        for (int j = 0; j < nh; ++j) {
            double z = m.b1[j];
            const double* w = &m.w1[j * ni];
            for (int i = 0; i < ni; ++i) z += w[i] * row[i];
            h[j] = std::tanh(z);
        }
        for (int k = 0; k < no; ++k) {
            double y = m.b2[k];
            const double* w = &m.w2[k * nh];
            for (int j = 0; j < nh; ++j) y += w[j] * h[j];
            double e = y - row[k];
            sum += e * e;
        }
    }
    return sum / (static_cast<double>(n) * no);
}

GradientBundle gradient_on_matrix(const AutoencoderModel& m, const double* x, std::size_t n) {
    const int ni = m.config.n_in, nh = m.config.n_hidden, no = m.config.n_out;
    GradientBundle g;
    g.w1.assign(m.w1.size(), 0.0);
    g.b1.assign(m.b1.size(), 0.0);
    g.w2.assign(m.w2.size(), 0.0);
    g.b2.assign(m.b2.size(), 0.0);

    const double scale = 2.0 / (static_cast<double>(n) * no);
    std::vector<double> h(nh), y(no), d2(no), d1(nh);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x + r * ni;
        for (int j = 0; j < nh; ++j) {
            double z = m.b1[j];
            const double* w = &m.w1[j * ni];
            for (int i = 0; i < ni; ++i) z += w[i] * row[i];
            h[j] = std::tanh(z);
        }
        for (int k = 0; k < no; ++k) {
            double v = m.b2[k];
            const double* w = &m.w2[k * nh];
            for (int j = 0; j < nh; ++j) v += w[j] * h[j];
            y[k] = v;
            d2[k] = scale * (v - row[k]);
        }
        for (int j = 0; j < nh; ++j) {
            double acc = 0.0;
            for (int k = 0; k < no; ++k) acc += m.w2[k * nh + j] * d2[k];
            d1[j] = acc * (1.0 - h[j] * h[j]);
        }
        for (int k = 0; k < no; ++k) {
            double dk = d2[k];
            double* gw = &g.w2[k * nh];
            for (int j = 0; j < nh; ++j) gw[j] += dk * h[j];
            g.b2[k] += dk;
        }
        for (int j = 0; j < nh; ++j) {
            double dj = d1[j];
            double* gw = &g.w1[j * ni];
            for (int i = 0; i < ni; ++i) gw[i] += dj * row[i];
            g.b1[j] += dj;
        }
    }
    return g;
}

std::vector<double> pack(const AutoencoderModel& m) {
    std::vector<double> t;
    t.reserve(m.parameter_count());
    t.insert(t.end(), m.w1.begin(), m.w1.end());
    t.insert(t.end(), m.b1.begin(), m.b1.end());
    t.insert(t.end(), m.w2.begin(), m.w2.end());
    t.insert(t.end(), m.b2.begin(), m.b2.end());
    return t;
}

void unpack(const std::vector<double>& t, AutoencoderModel& m) {
    std::size_t p = 0;
    std::copy_n(t.begin() + p, m.w1.size(), m.w1.begin()), p += m.w1.size();
    std::copy_n(t.begin() + p, m.b1.size(), m.b1.begin()), p += m.b1.size();
    std::copy_n(t.begin() + p, m.w2.size(), m.w2.begin()), p += m.w2.size();
    std::copy_n(t.begin() + p, m.b2.size(), m.b2.begin());
}

std::vector<double> flatten_gradient(const GradientBundle& g) {
    std::vector<double> t;
    t.reserve(g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size());
    t.insert(t.end(), g.w1.begin(), g.w1.end());
    t.insert(t.end(), g.b1.begin(), g.b1.end());
    t.insert(t.end(), g.w2.begin(), g.w2.end());
    t.insert(t.end(), g.b2.begin(), g.b2.end());
    return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<double> dataset_matrix(const Dataset& d) {
    std::vector<double> x;
    x.reserve(d.records.size() * d.schema.arity());
    for (const auto& r : d.records) {
        if (!r.complete()) throw DataError("dataset_matrix requires complete records");
        for (const auto& v : r.values) x.push_back(*v);
    }
    return x;
}

AutoencoderModel init_model(const NetworkConfig& config, const NormalizationParams& norm) {
    if (config.n_in <= 0 || config.n_hidden <= 0 || config.n_out != config.n_in)
        throw ConfigError("network needs n_in > 0 and n_out = n_in");
    if (config.n_hidden >= config.n_in)
        throw ConfigError("bottleneck violated: n_hidden must be less than n_in");

    AutoencoderModel m;
    m.config = config;
    m.norm = norm;
    m.w1.resize(static_cast<std::size_t>(config.n_hidden) * config.n_in);
    m.b1.assign(config.n_hidden, 0.0);
    m.w2.resize(static_cast<std::size_t>(config.n_out) * config.n_hidden);
    m.b2.assign(config.n_out, 0.0);

    Rng rng(config.seed);
    double r1 = 1.0 / std::sqrt(static_cast<double>(config.n_in));
    for (auto& w : m.w1) w = rng.uniform(-r1, r1);
    double r2 = 1.0 / std::sqrt(static_cast<double>(config.n_hidden));
    for (auto& w : m.w2) w = rng.uniform(-r2, r2);
    return m;
}

std::vector<double> forward(const AutoencoderModel& m, std::span<const double> x) {
    check_dims(m);
    if (x.size() != static_cast<std::size_t>(m.config.n_in))
        throw DataError("input has " + std::to_string(x.size()) + " components, expected " +
                        std::to_string(m.config.n_in));
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("non-finite network input");

    const int ni = m.config.n_in, nh = m.config.n_hidden, no = m.config.n_out;
    std::vector<double> h(nh), y(no);
    for (int j = 0; j < nh; ++j) {
        double z = m.b1[j];
        for (int i = 0; i < ni; ++i) z += m.w1[j * ni + i] * x[i];
        h[j] = std::tanh(z);
    }
    for (int k = 0; k < no; ++k) {
        double v = m.b2[k];
        for (int j = 0; j < nh; ++j) v += m.w2[k * nh + j] * h[j];
        y[k] = v;
    }
    return y;
}

double loss_mse(const AutoencoderModel& m, const Dataset& data) {
    check_dims(m);
    check_training_data(data, "loss");
    auto x = dataset_matrix(data);
    return mse_on_matrix(m, x.data(), data.records.size());
}

GradientBundle gradient(const AutoencoderModel& m, const Dataset& data) {
    check_dims(m);
    check_training_data(data, "gradient");
    auto x = dataset_matrix(data);
    return gradient_on_matrix(m, x.data(), data.records.size());
}

std::pair<AutoencoderModel, TrainReport> train(const AutoencoderModel& m,
                                               const Dataset& train_set,
                                               const Dataset& validation_set) {
    check_dims(m);
    check_training_data(train_set, "training");
    check_training_data(validation_set, "validation");

    const auto x_train = dataset_matrix(train_set);
    const auto x_val = dataset_matrix(validation_set);
    const std::size_t n_train = train_set.records.size();
    const std::size_t n_val = validation_set.records.size();

    AutoencoderModel work = m;
    auto theta = pack(work);
    const std::size_t n_params = theta.size();

    auto loss_at = [&](const std::vector<double>& t) {
        unpack(t, work);
        return mse_on_matrix(work, x_train.data(), n_train);
    };
    auto grad_at = [&](const std::vector<double>& t) {
        unpack(t, work);
        return flatten_gradient(gradient_on_matrix(work, x_train.data(), n_train));
    };
    auto val_at = [&](const std::vector<double>& t) {
        unpack(t, work);
        return mse_on_matrix(work, x_val.data(), n_val);
    };

    TrainReport report;
    double f = loss_at(theta);
    if (!std::isfinite(f)) throw NumericError("training loss non-finite at cycle 0");

    double best_val = val_at(theta);
    auto best_theta = theta;
    int since_best = 0;

    auto g = grad_at(theta);
    std::vector<double> d(n_params);
    for (std::size_t i = 0; i < n_params; ++i) d[i] = -g[i];

    double alpha_prev = 1.0;
    bool is_steepest = true;
    std::vector<double> trial(n_params);

    for (int cycle = 1; cycle <= m.config.max_cycles; ++cycle) {
        double gg = dot(g, g);
        if (gg < 1e-30) break;  // gradient vanished, converged

        double gd = dot(g, d);
        if (gd >= 0.0) {  // not a descent direction, restart
            for (std::size_t i = 0; i < n_params; ++i) d[i] = -g[i];
            gd = -gg;
            is_steepest = true;
        }

        // Armijo backtracking
        double alpha = std::min(1.0, 4.0 * alpha_prev);
        bool accepted = false;
        double f_new = f;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t i = 0; i < n_params; ++i) trial[i] = theta[i] + alpha * d[i];
            f_new = loss_at(trial);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * gd) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (is_steepest) break;  // no progress even along -g
            for (std::size_t i = 0; i < n_params; ++i) d[i] = -g[i];
            is_steepest = true;
            continue;  // retry with steepest descent
        }

        theta.swap(trial);
        alpha_prev = alpha;
        if (!std::isfinite(f_new))
            throw NumericError("training diverged at cycle " + std::to_string(cycle));

        auto g_new = grad_at(theta);
        double beta = 0.0;
        if (cycle % static_cast<int>(n_params) != 0) {  // periodic restart
            double num = 0.0;
            for (std::size_t i = 0; i < n_params; ++i) num += g_new[i] * (g_new[i] - g[i]);
            beta = std::max(0.0, num / gg);  // Polak-Ribiere+
        }
        for (std::size_t i = 0; i < n_params; ++i) d[i] = -g_new[i] + beta * d[i];
        is_steepest = (beta == 0.0);
        g.swap(g_new);
        f = f_new;

        double val = val_at(theta);
        report.train_mse_history.push_back(f);
        report.validation_mse_history.push_back(val);
        report.cycles_run = cycle;

        if (val < best_val) {
            best_val = val;
            best_theta = theta;
            since_best = 0;
        } else if (++since_best >= m.config.early_stop_patience) {
            report.stopped_early = true;
            break;
        }
    }

    AutoencoderModel best = m;
    unpack(best_theta, best);
    report.final_train_mse = mse_on_matrix(best, x_train.data(), n_train);
    return {std::move(best), std::move(report)};
}

void save_model(const AutoencoderModel& m, const std::string& path) {
    check_dims(m);
    for (const auto* vec : {&m.w1, &m.b1, &m.w2, &m.b2})
        for (double v : *vec)
            if (!std::isfinite(v)) throw NumericError("refusing to save non-finite weights");
    if (m.norm.ranges.size() != static_cast<std::size_t>(m.config.n_in))
        throw DataError("model normalization params do not cover all inputs");

    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << "gapfill-autoencoder 1\n";
    out << m.config.n_in << ' ' << m.config.n_hidden << ' ' << m.config.n_out << '\n';
    auto write_row = [&](const double* v, int n) {
        for (int i = 0; i < n; ++i) out << (i ? " " : "") << g17(v[i]);
        out << '\n';
    };
    for (int j = 0; j < m.config.n_hidden; ++j) write_row(&m.w1[j * m.config.n_in], m.config.n_in);
    write_row(m.b1.data(), m.config.n_hidden);
    for (int k = 0; k < m.config.n_out; ++k) write_row(&m.w2[k * m.config.n_hidden], m.config.n_hidden);
    write_row(m.b2.data(), m.config.n_out);
    for (const auto& [lo, hi] : m.norm.ranges) out << g17(lo) << ' ' << g17(hi) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

AutoencoderModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "gapfill-autoencoder" || version != 1)
        throw DataError(path + ": not a gapfill-autoencoder v1 file");

    AutoencoderModel m;
    if (!(in >> m.config.n_in >> m.config.n_hidden >> m.config.n_out))
        throw DataError(path + ": bad dimension line");
    if (m.config.n_in <= 0 || m.config.n_hidden <= 0 || m.config.n_out != m.config.n_in)
        throw DataError(path + ": inconsistent dimensions");
    if (m.config.n_hidden >= m.config.n_in)
        throw DataError(path + ": bottleneck violated (n_hidden >= n_in)");

    auto read_all = [&](std::vector<double>& v, std::size_t n) {
        v.resize(n);
        for (auto& x : v)
            if (!(in >> x)) throw DataError(path + ": truncated weight data");
    };
    read_all(m.w1, static_cast<std::size_t>(m.config.n_hidden) * m.config.n_in);
    read_all(m.b1, m.config.n_hidden);
    read_all(m.w2, static_cast<std::size_t>(m.config.n_out) * m.config.n_hidden);
    read_all(m.b2, m.config.n_out);
    m.norm.ranges.resize(m.config.n_in);
    for (auto& [lo, hi] : m.norm.ranges)
        if (!(in >> lo >> hi)) throw DataError(path + ": truncated normalization data");
    return m;
}

}  // namespace gapfill
