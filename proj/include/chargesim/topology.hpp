#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chargesim/vehicle.hpp"

namespace chargesim {

enum class ChargerKind : std::uint8_t { AC, DC };

const char* to_string(ChargerKind kind) noexcept;
ChargerKind charger_kind_from_string(const std::string& s);

/// One charging port (a leaf of the station tree).
struct EvseSpec {
    int id = 0;
    /// Effective voltage; already includes the phase factor.
    double voltage_v = 400.0;
    double i_max_charge_a = 32.0;
    double i_max_discharge_a = 32.0;
    double eta_charge = 1.0;
    double eta_discharge = 1.0;
    ChargerKind kind = ChargerKind::AC;
};

/// Node of the electrical architecture. A node is either a splitter with
/// children or a leaf carrying an EVSE.
struct ArchNode {
    int id = 0;
    double capacity_a = std::numeric_limits<double>::infinity();
    double eta = 1.0;
    std::vector<ArchNode> children;
    std::optional<EvseSpec> evse;

    static ArchNode splitter(int id, double capacity_a, double eta, std::vector<ArchNode> children);
    static ArchNode leaf(EvseSpec spec);

    bool is_leaf() const noexcept { return evse.has_value(); }
};

class StationError : public std::invalid_argument {
public:
    enum class Kind { EmptyTree, DuplicateId, InvalidEfficiency, InvalidCapacity, InvalidLeaf, BadOrder, BadPreset };

    StationError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Flattened view of one splitter node. Leaves below a node occupy the
/// contiguous index range [leaf_begin, leaf_end).
struct NodeInfo {
    int id = 0;
    double capacity_a = 0.0;
    double eta = 1.0;
    std::size_t leaf_begin = 0;
    std::size_t leaf_end = 0;
    int depth = 0;
};

/// Validated, immutable station architecture.
///
/// Ports are numbered 0..N-1 in depth-first leaf order. When a battery is
/// present it is leaf N and hangs directly below the root, so it only counts
/// toward the root constraint. Nodes are stored children-before-parent; the
/// root is the last node.
class StationTree {
public:
    static StationTree build(ArchNode root, std::vector<int> evse_order = {},
                             std::optional<BatterySpec> battery = std::nullopt);

    std::size_t num_ports() const noexcept { return ports_.size(); }
    /// Ports plus the battery leaf, if any.
    std::size_t num_leaves() const noexcept { return ports_.size() + (battery_ ? 1 : 0); }
    std::span<const EvseSpec> ports() const noexcept { return ports_; }
    const EvseSpec& port(std::size_t i) const { return ports_.at(i); }

    /// Port indices in first-fit parking order.
    std::span<const std::size_t> parking_order() const noexcept { return parking_order_; }

    std::span<const NodeInfo> nodes() const noexcept { return nodes_; }
    int depth() const noexcept { return depth_; }

    const ArchNode& root() const noexcept { return root_; }
    const std::optional<BatterySpec>& battery() const noexcept { return battery_; }

    /// EVSE ids in parking order (the evse_order the tree was built with).
    std::vector<int> evse_order() const;

private:
    ArchNode root_;
    std::vector<EvseSpec> ports_;
    std::vector<std::size_t> parking_order_;
    std::vector<NodeInfo> nodes_;
    std::optional<BatterySpec> battery_;
    int depth_ = 0;
};

enum class StationLayout { SingleType, MultiType, NestedSplitters };

const char* to_string(StationLayout layout) noexcept;
StationLayout station_layout_from_string(const std::string& s);

/// Electrical defaults for the preset builders.
struct PresetParams {
    EvseSpec ac{0, 690.0, 32.0, 32.0, 0.95, 0.95, ChargerKind::AC};
    EvseSpec dc{0, 500.0, 300.0, 300.0, 0.95, 0.95, ChargerKind::DC};
    /// Splitter capacity as a fraction of the summed port maxima below it.
    double splitter_capacity_fraction = 0.8;
    double splitter_eta = 0.98;
    /// Root capacity; infinity leaves the grid connection unconstrained.
    double root_capacity_a = std::numeric_limits<double>::infinity();
    double root_eta = 1.0;
    int leaves_per_group = 2;
    std::optional<BatterySpec> battery;
};

/// Standard station shapes: all ports under the root (SingleType), one
/// splitter per charger kind (MultiType), or kind splitters that fan out into
/// groups of `leaves_per_group` ports (NestedSplitters). DC ports come first.
StationTree preset_station(StationLayout layout, int ac_count, int dc_count, const PresetParams& params = {});

/// The default 16-port station: 10 DC and 6 AC ports under per-kind splitters.
StationTree default_station();

/// Load of every node (same order as StationTree::nodes()). Net sums are
/// divided by eta when drawing and multiplied by eta when exporting.
std::vector<double> node_load(const StationTree& tree, std::span<const double> leaf_currents);

/// Rescale currents in place until every node satisfies |load| <= capacity.
void enforce_limits_inplace(const StationTree& tree, std::span<double> leaf_currents);

std::vector<double> enforce_limits(const StationTree& tree, std::span<const double> leaf_currents);

/// Largest amount by which any node exceeds its capacity; 0 when feasible.
double violation_excess(const StationTree& tree, std::span<const double> leaf_currents);

} // namespace chargesim
