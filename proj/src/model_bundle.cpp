#include "mkprice/model_bundle.hpp"

#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"

namespace mkprice {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string block_file(const char* family, std::size_t i) {
    return std::string(family) + "_block_" + std::to_string(i) + ".csv";
}

std::string kernel_file(const char* family, std::size_t i) {
    return std::string(family) + "_kernel_" + std::to_string(i) + ".csv";
}

Eigen::MatrixXd read_shaped(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m = read_matrix_csv(path);
    require(m.rows() == rows && m.cols() == cols, path.filename().string() + " is " + std::to_string(m.rows()) + "x" +
                                                      std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                                                      "x" + std::to_string(cols));
    return m;
}

template <typename T>
T field(const json& j, const char* key) {
    require(j.contains(key), std::string("model manifest: missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("model manifest: malformed '") + key + "'");
    }
}

}  // namespace

void save_model_bundle(const fs::path& dir, const ModelBundle& b) {
    const auto& s = b.state;
    require(static_cast<Eigen::Index>(b.node_ids.size()) == s.nodes(), "model bundle: node id count differs from N");
    require(static_cast<Eigen::Index>(b.timestamps.size()) == s.hours(), "model bundle: timestamp count differs from T");
    fs::create_directories(dir);

    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["N"] = s.nodes();
    manifest["T"] = s.hours();
    manifest["R"] = s.rank;
    manifest["L"] = s.node_blocks.size();
    manifest["M"] = s.time_blocks.size();
    manifest["mu"] = s.mu;
    manifest["converged"] = s.converged;
    manifest["sweeps"] = s.sweeps;
    manifest["cost_trace"] = s.cost_trace;
    manifest["period"] = b.period;
    manifest["node_ids"] = b.node_ids;

    json node_kernels = json::array();
    for (std::size_t l = 0; l < s.node_blocks.size(); ++l) {
        node_kernels.push_back({{"label", s.node_blocks[l].kernel_label},
                                {"block_file", block_file("node", l)},
                                {"kernel_file", kernel_file("node", l)},
                                {"jitter", s.node_kernels[l]->jitter()}});
        write_matrix_csv(dir / block_file("node", l), s.node_blocks[l].coeffs);
        write_matrix_csv(dir / kernel_file("node", l), s.node_kernels[l]->gram());
    }
    json time_kernels = json::array();
    for (std::size_t m = 0; m < s.time_blocks.size(); ++m) {
        time_kernels.push_back({{"label", s.time_blocks[m].kernel_label},
                                {"block_file", block_file("time", m)},
                                {"kernel_file", kernel_file("time", m)},
                                {"jitter", s.time_kernels[m]->jitter()}});
        write_matrix_csv(dir / block_file("time", m), s.time_blocks[m].coeffs);
        write_matrix_csv(dir / kernel_file("time", m), s.time_kernels[m]->gram());
    }
    manifest["node_kernels"] = node_kernels;
    manifest["time_kernels"] = time_kernels;

    std::vector<std::string> stamps;
    stamps.reserve(b.timestamps.size());
    for (auto t : b.timestamps) {
        stamps.push_back(format_timestamp(t));
    }
    manifest["timestamps"] = stamps;
    manifest["hourly_means"] = std::vector<double>(b.hourly_means.data(), b.hourly_means.data() + b.hourly_means.size());
    manifest["config"] = b.config;

    write_matrix_csv(dir / "training_data.csv", b.training_data);
    write_matrix_csv(dir / "training_prices.csv", b.training_prices);
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelBundle load_model_bundle(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    require(fs::is_regular_file(manifest_path), "no model manifest at " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw InputError("model manifest: " + std::string(e.what()));
    }
    require(field<int>(manifest, "format_version") == kFormatVersion, "model manifest: unsupported format version");

    const auto n = field<Eigen::Index>(manifest, "N");
    const auto t = field<Eigen::Index>(manifest, "T");
    const auto r = field<int>(manifest, "R");
    require(n > 0 && t > 0 && r > 0, "model manifest: dimensions must be positive");

    ModelBundle b;
    auto& s = b.state;
    s.rank = r;
    s.mu = field<double>(manifest, "mu");
    s.converged = field<bool>(manifest, "converged");
    s.sweeps = field<int>(manifest, "sweeps");
    s.cost_trace = field<std::vector<double>>(manifest, "cost_trace");
    b.period = field<int>(manifest, "period");
    b.node_ids = field<std::vector<std::string>>(manifest, "node_ids");
    require(static_cast<Eigen::Index>(b.node_ids.size()) == n, "model manifest: node_ids length differs from N");

    auto load_family = [&](const char* key, Eigen::Index size, std::vector<FactorBlock>& blocks,
                           std::vector<KernelPtr>& kernels) {
        const auto entries = field<json>(manifest, key);
        require(entries.is_array() && !entries.empty(), std::string("model manifest: '") + key + "' must be a nonempty list");
        for (const auto& e : entries) {
            const auto label = field<std::string>(e, "label");
            const Eigen::MatrixXd gram = read_shaped(dir / field<std::string>(e, "kernel_file"), size, size);
            auto kernel = share(KernelMatrix::from_gram(label, gram, false));
            FactorBlock block{read_shaped(dir / field<std::string>(e, "block_file"), size, r), label, 0.0};
            block.block_norm = block_norm(block.coeffs, *kernel);
            blocks.push_back(std::move(block));
            kernels.push_back(std::move(kernel));
        }
    };
    load_family("node_kernels", n, s.node_blocks, s.node_kernels);
    load_family("time_kernels", t, s.time_blocks, s.time_kernels);
    require(field<std::size_t>(manifest, "L") == s.node_blocks.size(), "model manifest: L differs from kernel list");
    require(field<std::size_t>(manifest, "M") == s.time_blocks.size(), "model manifest: M differs from kernel list");
    s.node_gate_open.clear();
    for (const auto& blk : s.node_blocks) s.node_gate_open.push_back(blk.block_norm > 0.0);
    s.time_gate_open.clear();
    for (const auto& blk : s.time_blocks) s.time_gate_open.push_back(blk.block_norm > 0.0);
    s.recompute_aggregates();

    for (const auto& text : field<std::vector<std::string>>(manifest, "timestamps")) {
        b.timestamps.push_back(parse_timestamp(text));
    }
    require(static_cast<Eigen::Index>(b.timestamps.size()) == t, "model manifest: timestamps length differs from T");
    const auto means = field<std::vector<double>>(manifest, "hourly_means");
    b.hourly_means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    b.training_data = read_shaped(dir / "training_data.csv", n, t);
    b.training_prices = read_shaped(dir / "training_prices.csv", n, t);
    b.config = manifest.value("config", json());
    return b;
}

}  // namespace mkprice
