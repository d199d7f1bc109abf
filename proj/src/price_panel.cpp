#include "mkprice/price_panel.hpp"

#include <sstream>

#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"

namespace mkprice {

void PricePanel::validate() const {
    require(period >= 1, "period must be a positive number of hours");
    require(static_cast<Eigen::Index>(node_ids.size()) == prices.rows(),
            "price panel has " + std::to_string(prices.rows()) + " rows but " + std::to_string(node_ids.size()) +
                " node ids");
    require(static_cast<Eigen::Index>(timestamps.size()) == prices.cols(),
            "price panel has " + std::to_string(prices.cols()) + " columns but " +
                std::to_string(timestamps.size()) + " timestamps");
    for (std::size_t t = 1; t < timestamps.size(); ++t) {
        if (timestamps[t] - timestamps[t - 1] != std::chrono::hours{1}) {
            throw InputError("timestamps are not contiguous hours at '" + format_timestamp(timestamps[t]) + "'");
        }
    }
    if (hourly_means) {
        require(hourly_means->size() == period, "hourly means length differs from the period");
    }
}

PricePanel PricePanel::slice_hours(Eigen::Index first, Eigen::Index count) const {
    require(first >= 0 && count >= 0 && first + count <= hours(), "hour slice out of range");
    PricePanel out;
    out.prices = prices.middleCols(first, count);
    out.node_ids = node_ids;
    out.timestamps.assign(timestamps.begin() + first, timestamps.begin() + first + count);
    out.period = period;
    out.hourly_means = hourly_means;
    return out;
}

PricePanel center_prices(const PricePanel& panel) {
    panel.validate();
    require(panel.nodes() > 0 && panel.hours() > 0, "cannot center an empty price panel");
    const int period = panel.period;
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(period);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(period);
    for (Eigen::Index t = 0; t < panel.hours(); ++t) {
        const int s = cycle_slot(panel.timestamps[static_cast<std::size_t>(t)], period);
        sums(s) += panel.prices.col(t).sum();
        counts(s) += static_cast<double>(panel.nodes());
    }
    for (int s = 0; s < period; ++s) {
        if (counts(s) == 0.0) {
            throw InputError("cycle slot " + std::to_string(s) + " is never observed; cannot center");
        }
    }
    Eigen::VectorXd means = sums.cwiseQuotient(counts);

    PricePanel out = panel;
    for (Eigen::Index t = 0; t < panel.hours(); ++t) {
        const int s = cycle_slot(panel.timestamps[static_cast<std::size_t>(t)], period);
        out.prices.col(t).array() -= means(s);
    }
    // Stack with means already removed so that de-centering restores the raw input.
    if (panel.hourly_means) {
        means += *panel.hourly_means;
    }
    out.hourly_means = means;
    return out;
}

Eigen::MatrixXd decenter(const Eigen::MatrixXd& centered, const Eigen::VectorXd& hourly_means,
                         const std::vector<Timestamp>& timestamps, int period) {
    require(static_cast<Eigen::Index>(timestamps.size()) == centered.cols(), "decenter: timestamp count mismatch");
    require(hourly_means.size() == period, "decenter: hourly means length differs from the period");
    Eigen::MatrixXd out = centered;
    for (Eigen::Index t = 0; t < centered.cols(); ++t) {
        out.col(t).array() += hourly_means(cycle_slot(timestamps[static_cast<std::size_t>(t)], period));
    }
    return out;
}

PricePanel load_price_csv(const std::filesystem::path& path, int period) {
    const auto rows = read_csv(path);
    require(rows.size() >= 2, "price file '" + path.string() + "' needs a header and at least one node row");
    const auto& header = rows.front();
    require(header.size() >= 2, "price file '" + path.string() + "' has no timestamp columns");
    PricePanel panel;
    panel.period = period;
    for (std::size_t j = 1; j < header.size(); ++j) {
        panel.timestamps.push_back(parse_timestamp(header[j]));
    }
    const auto n = rows.size() - 1;
    const auto t = header.size() - 1;
    panel.prices.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        require(row.size() == header.size(), "price file '" + path.string() + "': row for node '" + row.front() +
                                                 "' has " + std::to_string(row.size()) + " fields, expected " +
                                                 std::to_string(header.size()));
        panel.node_ids.push_back(row.front());
        for (std::size_t j = 0; j < t; ++j) {
            panel.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                parse_double(row[j + 1], path.string());
        }
    }
    panel.validate();
    return panel;
}

void save_price_csv(const std::filesystem::path& path, const Eigen::MatrixXd& prices,
                    const std::vector<std::string>& node_ids, const std::vector<Timestamp>& timestamps) {
    require(static_cast<Eigen::Index>(node_ids.size()) == prices.rows() &&
                static_cast<Eigen::Index>(timestamps.size()) == prices.cols(),
            "save_price_csv: shape mismatch");
    std::ostringstream out;
    out << "node";
    for (const auto& ts : timestamps) {
        out << ',' << format_timestamp(ts);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < prices.rows(); ++i) {
        out << node_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < prices.cols(); ++j) {
            out << ',' << format_double(prices(i, j));
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<Timestamp> hour_range(Timestamp start, Eigen::Index count) {
    std::vector<Timestamp> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
        out.push_back(start + std::chrono::hours{i});
    }
    return out;
}

}  // namespace mkprice
