#include "chargesim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace chargesim {

namespace {

bool valid_eta(double eta) { return eta > 0.0 && eta <= 1.0; }

void validate_evse(const EvseSpec& e) {
    const std::string where = "evse " + std::to_string(e.id);
    if (!(e.voltage_v > 0.0)) throw StationError(StationError::Kind::InvalidLeaf, where + ": voltage must be positive");
    if (!(e.i_max_charge_a >= 0.0) || !(e.i_max_discharge_a >= 0.0))
        throw StationError(StationError::Kind::InvalidLeaf, where + ": negative current limit");
    if (!valid_eta(e.eta_charge) || !valid_eta(e.eta_discharge))
        throw StationError(StationError::Kind::InvalidEfficiency, where + ": efficiency outside (0, 1]");
}

void validate_battery(const BatterySpec& b) {
    const bool ok = b.voltage_v > 0.0 && b.capacity_kwh > 0.0 && b.r_max_kw >= 0.0 && b.tau > 0.0 && b.tau < 1.0 &&
                    b.initial_soc >= 0.0 && b.initial_soc <= 1.0;
    if (!ok) throw StationError(StationError::Kind::InvalidLeaf, "battery: invalid specification");
    if (!valid_eta(b.eta_charge) || !valid_eta(b.eta_discharge))
        throw StationError(StationError::Kind::InvalidEfficiency, "battery: efficiency outside (0, 1]");
}

struct Flattener {
    std::vector<EvseSpec> ports;
    std::vector<NodeInfo> nodes;
    std::set<int> evse_ids;
    std::set<int> node_ids;
    int max_depth = 0;

    void visit(const ArchNode& node, int depth) {
        if (node.is_leaf()) {
            if (!node.children.empty())
                throw StationError(StationError::Kind::InvalidLeaf, "leaf node with children");
            validate_evse(*node.evse);
            if (!evse_ids.insert(node.evse->id).second)
                throw StationError(StationError::Kind::DuplicateId, "duplicate evse id " + std::to_string(node.evse->id));
            ports.push_back(*node.evse);
            return;
        }
        if (!node_ids.insert(node.id).second)
            throw StationError(StationError::Kind::DuplicateId, "duplicate node id " + std::to_string(node.id));
        if (!valid_eta(node.eta))
            throw StationError(StationError::Kind::InvalidEfficiency,
                               "node " + std::to_string(node.id) + ": efficiency outside (0, 1]");
        if (!(node.capacity_a >= 0.0))
            throw StationError(StationError::Kind::InvalidCapacity,
                               "node " + std::to_string(node.id) + ": capacity must be non-negative");
        max_depth = std::max(max_depth, depth);
        const std::size_t begin = ports.size();
        for (const auto& child : node.children) visit(child, depth + 1);
        nodes.push_back(NodeInfo{node.id, node.capacity_a, node.eta, begin, ports.size(), depth});
    }
};

inline double net_to_load(double net, double eta) { return net >= 0.0 ? net / eta : net * eta; }

double subtree_net(const NodeInfo& n, std::span<const double> currents) {
    double sum = 0.0;
    for (std::size_t i = n.leaf_begin; i < n.leaf_end; ++i) sum += currents[i];
    return sum;
}

void check_length(const StationTree& tree, std::size_t n) {
    if (n != tree.num_leaves())
        throw std::invalid_argument("leaf current vector has " + std::to_string(n) + " entries, expected " +
                                    std::to_string(tree.num_leaves()));
}

} // namespace

const char* to_string(ChargerKind kind) noexcept { return kind == ChargerKind::AC ? "AC" : "DC"; }

ChargerKind charger_kind_from_string(const std::string& s) {
    if (s == "AC" || s == "ac") return ChargerKind::AC;
    if (s == "DC" || s == "dc") return ChargerKind::DC;
    throw StationError(StationError::Kind::InvalidLeaf, "unknown charger kind '" + s + "'");
}

ArchNode ArchNode::splitter(int id, double capacity_a, double eta, std::vector<ArchNode> children) {
    ArchNode n;
    n.id = id;
    n.capacity_a = capacity_a;
    n.eta = eta;
    n.children = std::move(children);
    return n;
}

ArchNode ArchNode::leaf(EvseSpec spec) {
    ArchNode n;
    n.id = spec.id;
    n.evse = spec;
    return n;
}

StationTree StationTree::build(ArchNode root, std::vector<int> evse_order, std::optional<BatterySpec> battery) {
    if (root.is_leaf()) throw StationError(StationError::Kind::InvalidLeaf, "root must be a splitter node");
    Flattener f;
    f.visit(root, 0);
    if (f.ports.empty()) throw StationError(StationError::Kind::EmptyTree, "station has no charging ports");
    if (battery) validate_battery(*battery);

    StationTree tree;
    tree.ports_ = std::move(f.ports);
    tree.nodes_ = std::move(f.nodes);
    tree.depth_ = f.max_depth;
    tree.battery_ = battery;
    if (battery) tree.nodes_.back().leaf_end += 1;

    std::unordered_map<int, std::size_t> index_of;
    for (std::size_t i = 0; i < tree.ports_.size(); ++i) index_of[tree.ports_[i].id] = i;

    if (evse_order.empty()) {
        tree.parking_order_.resize(tree.ports_.size());
        for (std::size_t i = 0; i < tree.ports_.size(); ++i) tree.parking_order_[i] = i;
    } else {
        if (evse_order.size() != tree.ports_.size())
            throw StationError(StationError::Kind::BadOrder, "evse order must list every port exactly once");
        std::vector<bool> seen(tree.ports_.size(), false);
        for (int id : evse_order) {
            auto it = index_of.find(id);
            if (it == index_of.end() || seen[it->second])
                throw StationError(StationError::Kind::BadOrder, "evse order is not a permutation of the port ids");
            seen[it->second] = true;
            tree.parking_order_.push_back(it->second);
        }
    }
    tree.root_ = std::move(root);
    return tree;
}

std::vector<int> StationTree::evse_order() const {
    std::vector<int> ids;
    ids.reserve(parking_order_.size());
    for (auto i : parking_order_) ids.push_back(ports_[i].id);
    return ids;
}

const char* to_string(StationLayout layout) noexcept {
    switch (layout) {
    case StationLayout::SingleType: return "SingleType";
    case StationLayout::MultiType: return "MultiType";
    case StationLayout::NestedSplitters: return "NestedSplitters";
    }
    return "?";
}

StationLayout station_layout_from_string(const std::string& s) {
    if (s == "SingleType" || s == "single") return StationLayout::SingleType;
    if (s == "MultiType" || s == "multi") return StationLayout::MultiType;
    if (s == "NestedSplitters" || s == "nested") return StationLayout::NestedSplitters;
    throw StationError(StationError::Kind::BadPreset, "unknown station layout '" + s + "'");
}

StationTree preset_station(StationLayout layout, int ac_count, int dc_count, const PresetParams& params) {
    if (ac_count < 0 || dc_count < 0 || ac_count + dc_count < 1)
        throw StationError(StationError::Kind::BadPreset, "preset needs at least one charger");
    if (layout == StationLayout::NestedSplitters && params.leaves_per_group < 1)
        throw StationError(StationError::Kind::BadPreset, "leaves_per_group must be positive");

    int next_evse = 0;
    int next_node = 1;
    auto make_leaves = [&](const EvseSpec& proto, int count) {
        std::vector<ArchNode> leaves;
        for (int i = 0; i < count; ++i) {
            EvseSpec e = proto;
            e.id = next_evse++;
            leaves.push_back(ArchNode::leaf(e));
        }
        return leaves;
    };
    auto capacity_for = [&](const EvseSpec& proto, std::size_t count) {
        return params.splitter_capacity_fraction * proto.i_max_charge_a * static_cast<double>(count);
    };

    std::vector<ArchNode> top;
    struct Group {
        const EvseSpec* proto;
        int count;
    };
    const Group groups[] = {{&params.dc, dc_count}, {&params.ac, ac_count}};

    for (const auto& g : groups) {
        if (g.count == 0) continue;
        auto leaves = make_leaves(*g.proto, g.count);
        switch (layout) {
        case StationLayout::SingleType:
            for (auto& l : leaves) top.push_back(std::move(l));
            break;
        case StationLayout::MultiType: {
            const double cap = capacity_for(*g.proto, leaves.size());
            top.push_back(ArchNode::splitter(next_node++, cap, params.splitter_eta, std::move(leaves)));
            break;
        }
        case StationLayout::NestedSplitters: {
            const int type_id = next_node++;
            std::vector<ArchNode> subs;
            for (std::size_t i = 0; i < leaves.size(); i += static_cast<std::size_t>(params.leaves_per_group)) {
                const std::size_t end = std::min(leaves.size(), i + static_cast<std::size_t>(params.leaves_per_group));
                std::vector<ArchNode> chunk(std::make_move_iterator(leaves.begin() + static_cast<std::ptrdiff_t>(i)),
                                            std::make_move_iterator(leaves.begin() + static_cast<std::ptrdiff_t>(end)));
                const double cap = capacity_for(*g.proto, chunk.size());
                subs.push_back(ArchNode::splitter(next_node++, cap, params.splitter_eta, std::move(chunk)));
            }
            top.push_back(ArchNode::splitter(type_id, capacity_for(*g.proto, static_cast<std::size_t>(g.count)),
                                             params.splitter_eta, std::move(subs)));
            break;
        }
        }
    }
    ArchNode root = ArchNode::splitter(0, params.root_capacity_a, params.root_eta, std::move(top));
    return StationTree::build(std::move(root), {}, params.battery);
}

StationTree default_station() { return preset_station(StationLayout::MultiType, 6, 10); }

std::vector<double> node_load(const StationTree& tree, std::span<const double> leaf_currents) {
    check_length(tree, leaf_currents.size());
    std::vector<double> loads;
    loads.reserve(tree.nodes().size());
    for (const auto& n : tree.nodes()) loads.push_back(net_to_load(subtree_net(n, leaf_currents), n.eta));
    return loads;
}

void enforce_limits_inplace(const StationTree& tree, std::span<double> leaf_currents) {
    check_length(tree, leaf_currents.size());
    // Children precede parents, so a forward sweep is bottom-up.
    const int max_passes = std::max(2, 2 * tree.depth() + 2);
    for (int pass = 0; pass < max_passes; ++pass) {
        bool changed = false;
        for (const auto& n : tree.nodes()) {
            double load = std::fabs(net_to_load(subtree_net(n, leaf_currents), n.eta));
            if (load <= n.capacity_a) continue;
            double scale = n.capacity_a / load;
            // The scaled sum can round a few ulps above capacity; shrink until it does not.
            for (int shrink = 0; shrink < 64 && load > n.capacity_a; ++shrink) {
                for (std::size_t i = n.leaf_begin; i < n.leaf_end; ++i) leaf_currents[i] *= scale;
                load = std::fabs(net_to_load(subtree_net(n, leaf_currents), n.eta));
                scale = 1.0 - std::ldexp(1.0, shrink - 52);
            }
            if (load > n.capacity_a)
                for (std::size_t i = n.leaf_begin; i < n.leaf_end; ++i) leaf_currents[i] = 0.0;
            changed = true;
        }
        if (!changed) break;
    }
}

std::vector<double> enforce_limits(const StationTree& tree, std::span<const double> leaf_currents) {
    std::vector<double> out(leaf_currents.begin(), leaf_currents.end());
    enforce_limits_inplace(tree, out);
    return out;
}

double violation_excess(const StationTree& tree, std::span<const double> leaf_currents) {
    check_length(tree, leaf_currents.size());
    double worst = 0.0;
    for (const auto& n : tree.nodes()) {
        const double load = std::fabs(net_to_load(subtree_net(n, leaf_currents), n.eta));
        worst = std::max(worst, load - n.capacity_a);
    }
    return worst;
}

} // namespace chargesim
