#include "mkprice/kernel_factory.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kJitterRatio = 1e-8;

void require_symmetric(const Eigen::MatrixXd& m, const std::string& what) {
    require(m.rows() == m.cols(), what + " must be square");
    const double norm = m.norm();
    require((m - m.transpose()).norm() <= kSymmetryTol * std::max(norm, 1e-300),
            what + " is not symmetric");
}

// Symmetric eigendecomposition with eigenvalues sorted nonincreasing.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> sorted_eigensystem(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) {
        throw InputError("eigendecomposition failed");
    }
    return {es.eigenvectors().rowwise().reverse(), es.eigenvalues().reverse()};
}

Eigen::MatrixXd spectral_function(const Eigen::MatrixXd& laplacian, double (*fn)(double, double), double param) {
    auto [vecs, vals] = sorted_eigensystem(laplacian);
    Eigen::VectorXd mapped(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        mapped(i) = fn(std::max(vals(i), 0.0), param);
    }
    Eigen::MatrixXd k = vecs * mapped.asDiagonal() * vecs.transpose();
    return 0.5 * (k + k.transpose());
}

}  // namespace

// ---------------------------------------------------------------------------
// WeightedGraph / FeatureTable

void WeightedGraph::validate() const {
    const auto n = node_ids.size();
    for (const auto& e : edges) {
        require(e.src < n && e.dst < n, "graph edge index out of range");
        require(e.src != e.dst, "graph self-loop on node '" + node_ids[e.src] + "'");
        require(std::isfinite(e.weight) && e.weight >= 0.0,
                "negative edge weight between '" + node_ids[e.src] + "' and '" + node_ids[e.dst] + "'");
    }
}

Eigen::MatrixXd WeightedGraph::adjacency() const {
    validate();
    const auto n = static_cast<Eigen::Index>(node_ids.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges) {
        const auto i = static_cast<Eigen::Index>(e.src);
        const auto j = static_cast<Eigen::Index>(e.dst);
        a(i, j) += e.weight;
        a(j, i) += e.weight;
    }
    return a;
}

void FeatureTable::validate() const {
    for (const auto& c : columns) {
        require(c.size() == entity_ids.size(), "feature column '" + c.name + "' has " + std::to_string(c.size()) +
                                                   " values for " + std::to_string(entity_ids.size()) + " entities");
    }
}

FeatureTable FeatureTable::select_rows(const std::vector<std::string>& ids) const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < entity_ids.size(); ++i) {
        index.emplace(entity_ids[i], i);
    }
    FeatureTable out;
    out.entity_ids = ids;
    out.standardized = standardized;
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) {
            throw InputError("no features for entity '" + id + "'");
        }
        rows.push_back(it->second);
    }
    for (const auto& c : columns) {
        FeatureColumn nc{c.name, c.categorical, {}, {}};
        for (auto r : rows) {
            if (c.categorical) {
                nc.levels.push_back(c.levels[r]);
            } else {
                nc.numeric.push_back(c.numeric[r]);
            }
        }
        out.columns.push_back(std::move(nc));
    }
    return out;
}

FeatureTable FeatureTable::select_columns(const std::vector<std::string>& names) const {
    if (names.empty()) {
        return *this;
    }
    FeatureTable out;
    out.entity_ids = entity_ids;
    out.standardized = standardized;
    for (const auto& name : names) {
        auto it = std::find_if(columns.begin(), columns.end(), [&](const FeatureColumn& c) { return c.name == name; });
        if (it == columns.end()) {
            throw InputError("unknown feature column '" + name + "'");
        }
        out.columns.push_back(*it);
    }
    return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_features(const FeatureTable& a, const FeatureTable& b) {
    a.validate();
    b.validate();
    require(a.columns.size() == b.columns.size(), "feature tables have different column layouts");
    std::vector<Eigen::VectorXd> cols_a, cols_b;
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
        const auto& ca = a.columns[c];
        const auto& cb = b.columns[c];
        require(ca.name == cb.name && ca.categorical == cb.categorical,
                "feature tables have different column layouts at '" + ca.name + "'");
        if (!ca.categorical) {
            cols_a.push_back(Eigen::Map<const Eigen::VectorXd>(ca.numeric.data(), static_cast<Eigen::Index>(ca.numeric.size())));
            cols_b.push_back(Eigen::Map<const Eigen::VectorXd>(cb.numeric.data(), static_cast<Eigen::Index>(cb.numeric.size())));
            continue;
        }
        std::set<std::string> levels(ca.levels.begin(), ca.levels.end());
        levels.insert(cb.levels.begin(), cb.levels.end());
        for (const auto& level : levels) {
            Eigen::VectorXd va(static_cast<Eigen::Index>(ca.levels.size()));
            Eigen::VectorXd vb(static_cast<Eigen::Index>(cb.levels.size()));
            for (std::size_t i = 0; i < ca.levels.size(); ++i) {
                va(static_cast<Eigen::Index>(i)) = ca.levels[i] == level ? 1.0 : 0.0;
            }
            for (std::size_t i = 0; i < cb.levels.size(); ++i) {
                vb(static_cast<Eigen::Index>(i)) = cb.levels[i] == level ? 1.0 : 0.0;
            }
            cols_a.push_back(std::move(va));
            cols_b.push_back(std::move(vb));
        }
    }
    Eigen::MatrixXd xa(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(cols_a.size()));
    Eigen::MatrixXd xb(static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(cols_b.size()));
    for (std::size_t c = 0; c < cols_a.size(); ++c) {
        xa.col(static_cast<Eigen::Index>(c)) = cols_a[c];
        xb.col(static_cast<Eigen::Index>(c)) = cols_b[c];
    }
    return {xa, xb};
}

Eigen::MatrixXd encode_features(const FeatureTable& f) {
    return encode_features(f, f).first;
}

// ---------------------------------------------------------------------------
// KernelMatrix

KernelMatrix KernelMatrix::from_gram(std::string label, Eigen::MatrixXd gram, bool allow_jitter) {
    require(gram.size() > 0, "kernel '" + label + "' is empty");
    require(gram.allFinite(), "kernel '" + label + "' has non-finite entries");
    require_symmetric(gram, "kernel '" + label + "'");
    gram = 0.5 * (gram + gram.transpose()).eval();

    KernelMatrix k;
    k.label_ = std::move(label);
    auto [vecs, vals] = sorted_eigensystem(gram);
    const double lmax = vals(0);
    const double lmin = vals(vals.size() - 1);
    if (lmin <= kJitterRatio * lmax || lmax <= 0.0) {
        if (!allow_jitter) {
            if (lmin <= 0.0) {
                throw InputError("kernel '" + k.label_ + "' is not positive definite");
            }
        } else {
            const double shift = kJitterRatio * std::max(lmax, 0.0) - lmin + 1e-12;
            gram.diagonal().array() += shift;
            vals.array() += shift;
            k.jitter_ = shift;
        }
    }
    k.gram_ = std::move(gram);
    k.eigvecs_ = std::move(vecs);
    k.eigvals_ = std::move(vals);
    return k;
}

Eigen::MatrixXd KernelMatrix::sqrt_times(const Eigen::MatrixXd& x) const {
    require(x.rows() == size(), "kernel '" + label_ + "': dimension mismatch in K^{1/2} X");
    return eigvecs_ * (eigvals_.array().sqrt().matrix().asDiagonal() * (eigvecs_.transpose() * x));
}

KernelPtr share(KernelMatrix k) {
    return std::make_shared<const KernelMatrix>(std::move(k));
}

// ---------------------------------------------------------------------------
// Kernel constructions

Eigen::MatrixXd build_graph_laplacian(const WeightedGraph& g) {
    const Eigen::MatrixXd a = g.adjacency();
    const Eigen::VectorXd degree = a.rowwise().sum();
    Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(degree.size());
    for (Eigen::Index i = 0; i < degree.size(); ++i) {
        if (degree(i) > 0.0) {
            inv_sqrt(i) = 1.0 / std::sqrt(degree(i));
        }
    }
    Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
    l.diagonal().array() += 1.0;
    return 0.5 * (l + l.transpose());
}

KernelMatrix regularized_laplacian_kernel(const Eigen::MatrixXd& laplacian, std::string label) {
    require_symmetric(laplacian, "Laplacian");
    return KernelMatrix::from_gram(std::move(label),
                                   spectral_function(laplacian, [](double l, double) { return 1.0 / (1.0 + l); }, 0.0));
}

KernelMatrix diffusion_kernel(const Eigen::MatrixXd& laplacian, double beta, std::string label) {
    require(beta > 0.0, "diffusion kernel requires beta > 0");
    require_symmetric(laplacian, "Laplacian");
    return KernelMatrix::from_gram(std::move(label),
                                   spectral_function(laplacian, [](double l, double b) { return std::exp(-b * l); }, beta));
}

double median_sq_bandwidth(const Eigen::MatrixXd& points) {
    const auto n = points.rows();
    require(n >= 2, "median bandwidth needs at least two entities");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d.push_back((points.row(i) - points.row(j)).squaredNorm());
        }
    }
    const auto mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double median = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    if (!(median > 0.0)) {
        throw InputError("median pairwise squared distance is zero; bandwidth must be positive");
    }
    return median;
}

double median_sq_bandwidth(const FeatureTable& f) {
    return median_sq_bandwidth(encode_features(f));
}

Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
    require(bandwidth > 0.0, "Gaussian bandwidth must be positive");
    require(x.cols() == y.cols(), "Gaussian kernel: feature dimension mismatch");
    Eigen::MatrixXd k(x.rows(), y.rows());
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            k(i, j) = std::exp(-(x.row(i) - y.row(j)).squaredNorm() / bandwidth);
        }
    }
    return k;
}

KernelMatrix gaussian_kernel(const FeatureTable& f, double bandwidth, std::string label) {
    const Eigen::MatrixXd x = encode_features(f);
    return KernelMatrix::from_gram(std::move(label), gaussian_gram(x, x, bandwidth));
}

KernelMatrix empirical_covariance_kernel(const PricePanel& history, std::string label) {
    require(history.hours() >= 2, "empirical covariance needs at least two time samples");
    const Eigen::MatrixXd centered = history.prices.colwise() - history.prices.rowwise().mean();
    Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(history.hours() - 1);
    return normalize_unit_diagonal(KernelMatrix::from_gram(std::move(label), std::move(cov)));
}

KernelMatrix normalize_unit_diagonal(const KernelMatrix& k) {
    const Eigen::VectorXd diag = k.gram().diagonal();
    require((diag.array() > 0.0).all(), "kernel '" + k.label() + "' has a nonpositive diagonal entry");
    const Eigen::VectorXd inv = diag.array().sqrt().inverse();
    Eigen::MatrixXd g = inv.asDiagonal() * k.gram() * inv.asDiagonal();
    g.diagonal().setOnes();
    return KernelMatrix::from_gram(k.label(), std::move(g), false);
}

// ---------------------------------------------------------------------------
// Feature scaling

FeatureScaler FeatureScaler::fit(const FeatureTable& f) {
    f.validate();
    FeatureScaler s;
    const auto n = static_cast<double>(f.rows());
    for (const auto& c : f.columns) {
        if (c.categorical) {
            continue;
        }
        require(f.rows() > 0, "cannot standardize an empty feature table");
        double mean = 0.0;
        for (double v : c.numeric) {
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (double v : c.numeric) {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        if (!(var > 1e-24 * std::max(1.0, mean * mean))) {
            s.dropped_.push_back(c.name);
            continue;
        }
        s.stats_.push_back({c.name, mean, std::sqrt(var)});
    }
    return s;
}

FeatureTable FeatureScaler::transform(const FeatureTable& f) const {
    f.validate();
    FeatureTable out;
    out.entity_ids = f.entity_ids;
    out.standardized = true;
    for (const auto& c : f.columns) {
        if (c.categorical) {
            out.columns.push_back(c);
            continue;
        }
        if (std::find(dropped_.begin(), dropped_.end(), c.name) != dropped_.end()) {
            continue;
        }
        auto it = std::find_if(stats_.begin(), stats_.end(), [&](const ColumnStats& s) { return s.name == c.name; });
        require(it != stats_.end(), "feature column '" + c.name + "' was not seen when fitting the scaler");
        FeatureColumn nc{c.name, false, {}, {}};
        nc.numeric.reserve(c.numeric.size());
        for (double v : c.numeric) {
            nc.numeric.push_back((v - it->mean) / it->scale);
        }
        out.columns.push_back(std::move(nc));
    }
    return out;
}

FeatureTable standardize_features(const FeatureTable& f) {
    const auto scaler = FeatureScaler::fit(f);
    for (const auto& name : scaler.dropped()) {
        std::cerr << "warning: dropping zero-variance feature column '" << name << "'\n";
    }
    return scaler.transform(f);
}

// ---------------------------------------------------------------------------
// File formats

WeightedGraph load_graph_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids) {
    const auto rows = read_csv(path);
    require(!rows.empty(), "graph file '" + path.string() + "' is empty");
    const auto& header = rows.front();
    require(header.size() == 3 && header[0] == "src" && header[1] == "dst" && header[2] == "weight",
            "graph file '" + path.string() + "' must have header src,dst,weight");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
        index.emplace(node_ids[i], i);
    }
    WeightedGraph g;
    g.node_ids = node_ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        require(row.size() == 3, "graph file '" + path.string() + "': line " + std::to_string(r + 1) + " needs 3 fields");
        auto s = index.find(row[0]);
        auto d = index.find(row[1]);
        require(s != index.end(), "graph edge references unknown node '" + row[0] + "'");
        require(d != index.end(), "graph edge references unknown node '" + row[1] + "'");
        g.edges.push_back({s->second, d->second, parse_double(row[2], path.string())});
    }
    g.validate();
    return g;
}

void save_graph_csv(const std::filesystem::path& path, const WeightedGraph& g) {
    std::ostringstream out;
    out << "src,dst,weight\n";
    for (const auto& e : g.edges) {
        out << g.node_ids[e.src] << ',' << g.node_ids[e.dst] << ',' << format_double(e.weight) << '\n';
    }
    write_text_file(path, out.str());
}

FeatureTable load_feature_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    require(!rows.empty(), "feature file '" + path.string() + "' is empty");
    const auto& header = rows.front();
    require(header.size() >= 2, "feature file '" + path.string() + "' has no feature columns");
    FeatureTable f;
    for (std::size_t c = 1; c < header.size(); ++c) {
        f.columns.push_back({header[c], header[c].rfind("cat:", 0) == 0, {}, {}});
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        require(row.size() == header.size(), "feature file '" + path.string() + "': line " + std::to_string(r + 1) +
                                                 " has " + std::to_string(row.size()) + " fields");
        f.entity_ids.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c) {
            auto& col = f.columns[c - 1];
            if (col.categorical) {
                col.levels.push_back(row[c]);
            } else {
                col.numeric.push_back(parse_double(row[c], path.string()));
            }
        }
    }
    f.validate();
    return f;
}

void save_feature_csv(const std::filesystem::path& path, const FeatureTable& f) {
    f.validate();
    std::ostringstream out;
    out << "id";
    for (const auto& c : f.columns) {
        out << ',' << c.name;
    }
    out << '\n';
    for (std::size_t r = 0; r < f.rows(); ++r) {
        out << f.entity_ids[r];
        for (const auto& c : f.columns) {
            out << ',' << (c.categorical ? c.levels[r] : format_double(c.numeric[r]));
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace mkprice
