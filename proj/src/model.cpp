#include "tlswitch/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tlswitch {

std::pair<int, double> LabeledMdp::step(int s, int a, SplitMix64& rng) const {
    const auto& d = trans[s][a];
    double u = rng.next_double();
    double cum = 0.0;
    int next = d.back().first;
    for (const auto& [t, p] : d) {
        cum += p;
        if (u < cum) {
            next = t;
            break;
        }
    }
    return {next, reward[next]};
}

void LabeledMdp::validate() const {
    const std::uint64_t ap_mask =
        ap.size() >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << ap.size()) - 1);
    for (int s = 0; s < num_states; ++s) {
        if ((label[s] & ~ap_mask) != 0)
            throw ModelError("state " + std::to_string(s) +
                             " labeled with a proposition outside the alphabet");
        for (int a = 0; a < num_actions; ++a) {
            double sum = 0.0;
            for (const auto& [t, p] : trans[s][a]) {
                if (t < 0 || t >= num_states)
                    throw ModelError("transition target out of range");
                if (p < 0.0 || p > 1.0)
                    throw ModelError("transition probability outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ModelError("distribution of (s=" + std::to_string(s) +
                                 ", a=" + std::to_string(a) + ") sums to " +
                                 std::to_string(sum));
        }
    }
}

KnowledgeModel make_knowledge(const LabeledMdp& mdp, double epsilon) {
    if (epsilon < 0.0 || epsilon >= 1.0)
        throw ModelError("epsilon must lie in [0,1)");
    KnowledgeModel km;
    km.epsilon = epsilon;
    km.support.assign(mdp.num_states, std::vector<std::vector<int>>(mdp.num_actions));
    km.likely.assign(mdp.num_states, std::vector<std::vector<int>>(mdp.num_actions));
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            for (const auto& [t, p] : mdp.trans[s][a]) {
                if (p > 0.0) km.support[s][a].push_back(t);
                if (p >= 1.0 - epsilon) km.likely[s][a].push_back(t);
            }
            std::sort(km.support[s][a].begin(), km.support[s][a].end());
            std::sort(km.likely[s][a].begin(), km.likely[s][a].end());
        }
    }
    return km;
}

// ── Grid world ───────────────────────────────────────────────────────────────

namespace {

// N, NE, E, SE, S, SW, W, NW (y grows northwards)
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {1, 1, 0, -1, -1, -1, 0, 1};
const char* kActionNames[9] = {"N", "NE", "E", "SE", "S", "SW", "W", "NW", "Stay"};

} // namespace

GridModel build_gridworld(const GridConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0)
        throw ModelError("grid dimensions must be positive");
    if (cfg.intended_prob < 0.0 || cfg.intended_prob > 1.0)
        throw ModelError("intended probability outside [0,1]");

    GridModel g;
    g.cfg = cfg;
    g.cell_state.assign(cfg.width * cfg.height, -1);

    auto in_grid = [&](int x, int y) { return x >= 0 && x < cfg.width && y >= 0 && y < cfg.height; };
    auto cell_index = [&](std::pair<int, int> c) { return c.second * cfg.width + c.first; };

    std::vector<char> blocked(cfg.width * cfg.height, 0);
    for (const auto& c : cfg.obstacles) {
        if (!in_grid(c.first, c.second)) throw ModelError("obstacle outside the grid");
        blocked[cell_index(c)] = 1;
    }
    for (const auto& [prop, cells] : cfg.labels)
        for (const auto& c : cells) {
            if (!in_grid(c.first, c.second)) throw ModelError("labeled cell outside the grid");
            if (blocked[cell_index(c)])
                throw ModelError("labeled cell (" + std::to_string(c.first) + "," +
                                 std::to_string(c.second) + ") is an obstacle");
        }
    if (!in_grid(cfg.start.first, cfg.start.second) || blocked[cell_index(cfg.start)])
        throw ModelError("start cell missing or blocked");

    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
            if (!blocked[y * cfg.width + x]) {
                g.cell_state[y * cfg.width + x] = static_cast<int>(g.state_cell.size());
                g.state_cell.push_back({x, y});
            }

    LabeledMdp& mdp = g.mdp;
    mdp.num_states = static_cast<int>(g.state_cell.size());
    mdp.num_actions = 9;
    mdp.action_names.assign(kActionNames, kActionNames + 9);
    for (const auto& [prop, cells] : cfg.labels)
        mdp.ap.push_back(prop);
    mdp.label.assign(mdp.num_states, 0);
    for (std::size_t i = 0; i < cfg.labels.size(); ++i)
        for (const auto& c : cfg.labels[i].second)
            mdp.label[g.state_at(c.first, c.second)] |= (std::uint64_t{1} << i);

    mdp.reward.assign(mdp.num_states, 0.0);
    for (const auto& [cell, value] : cfg.rewards) {
        if (!in_grid(cell.first, cell.second) || blocked[cell_index(cell)])
            throw ModelError("reward cell missing or blocked");
        mdp.reward[g.state_at(cell.first, cell.second)] = value;
    }

    const double slip = (1.0 - cfg.intended_prob) / 2.0;
    mdp.trans.assign(mdp.num_states,
                     std::vector<std::vector<std::pair<int, double>>>(mdp.num_actions));
    for (int s = 0; s < mdp.num_states; ++s) {
        auto [x, y] = g.state_cell[s];
        for (int a = 0; a < 8; ++a) {
            std::map<int, double> mass;
            auto deposit = [&](int dir, double p) {
                int tx = x + kDx[dir], ty = y + kDy[dir];
                int t = in_grid(tx, ty) ? g.cell_state[ty * cfg.width + tx] : -1;
                mass[t >= 0 ? t : s] += p; // blocked component stays put
            };
            deposit(a, cfg.intended_prob);
            deposit((a + 1) % 8, slip);
            deposit((a + 7) % 8, slip);
            for (const auto& [t, p] : mass)
                mdp.trans[s][a].push_back({t, p});
        }
        mdp.trans[s][kGridStayAction].push_back({s, 1.0});
    }
    mdp.validate();

    g.knowledge = make_knowledge(mdp, cfg.epsilon_agent);
    g.start_state = g.state_at(cfg.start.first, cfg.start.second);
    return g;
}

// ── Config round trip ────────────────────────────────────────────────────────

namespace {

std::pair<int, int> cell_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2)
        throw ModelError("grid config: cells must be [x, y] pairs");
    return {j[0].get<int>(), j[1].get<int>()};
}

} // namespace

GridConfig load_grid_config(const nlohmann::json& doc) {
    GridConfig cfg;
    cfg.width = doc.at("width").get<int>();
    cfg.height = doc.at("height").get<int>();
    cfg.start = cell_from_json(doc.at("start"));
    if (doc.contains("obstacles"))
        for (const auto& c : doc["obstacles"])
            cfg.obstacles.push_back(cell_from_json(c));
    if (doc.contains("labels"))
        for (const auto& [prop, cells] : doc["labels"].items()) {
            std::vector<std::pair<int, int>> v;
            for (const auto& c : cells)
                v.push_back(cell_from_json(c));
            cfg.labels.push_back({prop, std::move(v)});
        }
    std::sort(cfg.labels.begin(), cfg.labels.end());
    if (doc.contains("rewards"))
        for (const auto& r : doc["rewards"])
            cfg.rewards.push_back({cell_from_json(r.at("cell")), r.at("value").get<double>()});
    if (doc.contains("intended_probability"))
        cfg.intended_prob = doc["intended_probability"].get<double>();
    if (doc.contains("epsilon_agent"))
        cfg.epsilon_agent = doc["epsilon_agent"].get<double>();
    return cfg;
}

nlohmann::json save_grid_config(const GridConfig& cfg) {
    nlohmann::json doc;
    doc["width"] = cfg.width;
    doc["height"] = cfg.height;
    doc["start"] = {cfg.start.first, cfg.start.second};
    doc["obstacles"] = nlohmann::json::array();
    for (const auto& c : cfg.obstacles)
        doc["obstacles"].push_back({c.first, c.second});
    doc["labels"] = nlohmann::json::object();
    for (const auto& [prop, cells] : cfg.labels) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : cells)
            arr.push_back({c.first, c.second});
        doc["labels"][prop] = std::move(arr);
    }
    doc["rewards"] = nlohmann::json::array();
    for (const auto& [cell, value] : cfg.rewards)
        doc["rewards"].push_back({{"cell", {cell.first, cell.second}}, {"value", value}});
    doc["intended_probability"] = cfg.intended_prob;
    doc["epsilon_agent"] = cfg.epsilon_agent;
    return doc;
}

std::string ascii_map(const GridModel& g) {
    const GridConfig& cfg = g.cfg;
    std::vector<std::string> cell(cfg.width * cfg.height, ".");
    for (const auto& [c, value] : cfg.rewards)
        cell[c.second * cfg.width + c.first] = value >= 10.0 ? "*" : "+";
    for (const auto& [prop, cells] : cfg.labels)
        for (const auto& c : cells)
            cell[c.second * cfg.width + c.first] = prop.substr(0, 1);
    for (const auto& c : cfg.obstacles)
        cell[c.second * cfg.width + c.first] = "#";

    std::string out;
    for (int y = cfg.height - 1; y >= 0; --y) {
        out += (y < 10 ? " " : "") + std::to_string(y) + " ";
        for (int x = 0; x < cfg.width; ++x) {
            bool is_start = cfg.start == std::make_pair(x, y);
            out += is_start ? "@" : cell[y * cfg.width + x];
            out += ' ';
        }
        out += '\n';
    }
    out += "   ";
    for (int x = 0; x < cfg.width; ++x)
        out += std::to_string(x % 10) + " ";
    out += "\nlegend: @ start, # obstacle, + reward, * high reward, letters label cells\n";
    return out;
}

} // namespace tlswitch
