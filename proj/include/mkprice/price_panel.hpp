#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/timestamps.hpp"

namespace mkprice {

/// Node x hour price observations.
///
/// Timestamps are strictly increasing and contiguous at one-hour resolution.
/// `hourly_means` is set once the panel has been centered: entry `s` holds
/// the mean that was removed from every hour with cycle slot `s`.
struct PricePanel {
    Eigen::MatrixXd prices;
    std::vector<std::string> node_ids;
    std::vector<Timestamp> timestamps;
    int period = 24;
    std::optional<Eigen::VectorXd> hourly_means;

    Eigen::Index nodes() const { return prices.rows(); }
    Eigen::Index hours() const { return prices.cols(); }

    // Throws InputError if shapes, ordering or contiguity are violated.
    void validate() const;

    /// Columns [first, first + count) as a new panel. Centering state is
    /// carried over.
    PricePanel slice_hours(Eigen::Index first, Eigen::Index count) const;
};

/// Subtracts the per-slot sample mean (over all cycles present) from every
/// entry. Every slot of the cycle must be observed at least once.
PricePanel center_prices(const PricePanel& panel);

/// Adds `hourly_means[cycle_slot(t)]` back to each column of `centered`.
Eigen::MatrixXd decenter(const Eigen::MatrixXd& centered, const Eigen::VectorXd& hourly_means,
                         const std::vector<Timestamp>& timestamps, int period);

/// Price CSV: header `node,<ISO timestamp>,...`, one row per node.
PricePanel load_price_csv(const std::filesystem::path& path, int period = 24);
void save_price_csv(const std::filesystem::path& path, const Eigen::MatrixXd& prices,
                    const std::vector<std::string>& node_ids, const std::vector<Timestamp>& timestamps);

/// `count` consecutive hours starting at `start`.
std::vector<Timestamp> hour_range(Timestamp start, Eigen::Index count);

}  // namespace mkprice
