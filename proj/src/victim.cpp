#include "bosh/victim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace bosh {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("model file: " + msg); }

const json& require_key(const json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) fail("missing field '" + ctx + key + "'");
    return *it;
}

double require_number(const json& j, const char* key, const std::string& ctx) {
    const json& v = require_key(j, key, ctx);
    if (!v.is_number()) fail("field '" + ctx + key + "' must be a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail("field '" + ctx + key + "' must be finite");
    return x;
}

int require_int(const json& j, const char* key, const std::string& ctx) {
    const json& v = require_key(j, key, ctx);
    if (!v.is_number_integer()) fail("field '" + ctx + key + "' must be an integer");
    return v.get<int>();
}

Vec require_vec(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.empty()) fail("field '" + ctx + "' must be a non-empty array");
    Vec out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) fail("field '" + ctx + "' must hold numbers");
        double d = x.get<double>();
        if (!std::isfinite(d)) fail("field '" + ctx + "' must hold finite numbers");
        out.push_back(d);
    }
    return out;
}

std::unique_ptr<VictimModel> parse_mlp(const json& j) {
    const json& jlayers = require_key(j, "layers", "");
    if (!jlayers.is_array() || jlayers.empty()) fail("field 'layers' must be a non-empty array");
    std::vector<MlpLayer> layers;
    for (std::size_t li = 0; li < jlayers.size(); ++li) {
        std::string ctx = "layers[" + std::to_string(li) + "].";
        const json& jl = jlayers[li];
        const json& jw = require_key(jl, "w", ctx);
        if (!jw.is_array() || jw.empty()) fail("field '" + ctx + "w' must be a non-empty array");
        MlpLayer layer;
        for (std::size_t r = 0; r < jw.size(); ++r)
            layer.w.push_back(require_vec(jw[r], ctx + "w[" + std::to_string(r) + "]"));
        layer.b = require_vec(require_key(jl, "b", ctx), ctx + "b");
        layers.push_back(std::move(layer));
    }
    try {
        return std::make_unique<MlpModel>(std::move(layers));
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

std::unique_ptr<VictimModel> parse_gbdt(const json& j) {
    int num_classes = require_int(j, "num_classes", "");
    const json& jtrees = require_key(j, "trees", "");
    if (!jtrees.is_array() || jtrees.empty()) fail("field 'trees' must be a non-empty array");
    std::vector<GbdtTree> trees;
    int max_feat = -1;
    for (std::size_t ti = 0; ti < jtrees.size(); ++ti) {
        std::string tctx = "trees[" + std::to_string(ti) + "].";
        const json& jt = jtrees[ti];
        GbdtTree tree;
        tree.class_index = require_int(jt, "class", tctx);
        const json& jnodes = require_key(jt, "nodes", tctx);
        if (!jnodes.is_array() || jnodes.empty())
            fail("field '" + tctx + "nodes' must be a non-empty array");
        for (std::size_t ni = 0; ni < jnodes.size(); ++ni) {
            std::string nctx = tctx + "nodes[" + std::to_string(ni) + "].";
            const json& jn = jnodes[ni];
            GbdtNode node;
            if (jn.contains("leaf")) {
                node.leaf = require_number(jn, "leaf", nctx);
            } else {
                node.feat = require_int(jn, "feat", nctx);
                node.thr = require_number(jn, "thr", nctx);
                node.left = require_int(jn, "left", nctx);
                node.right = require_int(jn, "right", nctx);
                max_feat = std::max(max_feat, node.feat);
            }
            tree.nodes.push_back(node);
        }
        trees.push_back(std::move(tree));
    }
    // Input width: explicit "d" when present, else inferred from the features used.
    int dim = j.contains("d") ? require_int(j, "d", "") : max_feat + 1;
    try {
        return std::make_unique<GbdtModel>(num_classes, dim, std::move(trees));
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

std::unique_ptr<VictimModel> parse_landscape(const json& j) {
    int d = require_int(j, "d", "");
    int base_label = require_int(j, "base_label", "");
    const json& jbasins = require_key(j, "basins", "");
    if (!jbasins.is_array() || jbasins.empty()) fail("field 'basins' must be a non-empty array");
    std::vector<Basin> basins;
    for (std::size_t bi = 0; bi < jbasins.size(); ++bi) {
        std::string ctx = "basins[" + std::to_string(bi) + "].";
        const json& jb = jbasins[bi];
        Basin basin;
        basin.center = require_vec(require_key(jb, "center", ctx), ctx + "center");
        basin.radius = require_number(jb, "radius", ctx);
        basin.label = require_int(jb, "label", ctx);
        basins.push_back(std::move(basin));
    }
    Vec x0 = require_vec(require_key(j, "x0", ""), "x0");
    std::unique_ptr<SyntheticLandscape> model;
    try {
        model = std::make_unique<SyntheticLandscape>(d, base_label, std::move(basins), std::move(x0));
    } catch (const std::exception& e) {
        fail(e.what());
    }
    if (j.contains("ground_truth")) {
        double stored = require_number(j, "ground_truth", "");
        double computed = model->ground_truth();
        double tol = 1e-9 * std::max(1.0, std::abs(computed));
        if (std::abs(stored - computed) > tol)
            fail("field 'ground_truth' is inconsistent with the basins and x0");
    }
    return model;
}

}  // namespace

Label predict(const VictimModel& model, const Vec& x, QueryLedger& ledger) {
    if (static_cast<int>(x.size()) != model.dim())
        throw std::invalid_argument("predict: input has dimension " + std::to_string(x.size()) +
                                    ", model expects " + std::to_string(model.dim()));
    ledger.count += 1;
    return model.classify(x);
}

MlpModel::MlpModel(std::vector<MlpLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("mlp needs at least one layer");
    int prev_out = -1;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const MlpLayer& l = layers_[li];
        if (l.w.empty()) throw std::invalid_argument("mlp layer " + std::to_string(li) + " is empty");
        std::size_t in = l.w.front().size();
        for (const Vec& row : l.w) {
            if (row.size() != in)
                throw std::invalid_argument("mlp layer " + std::to_string(li) + " has ragged rows");
            if (!all_finite(row))
                throw std::invalid_argument("mlp layer " + std::to_string(li) + " has non-finite weights");
        }
        if (l.b.size() != l.w.size())
            throw std::invalid_argument("mlp layer " + std::to_string(li) + " bias size mismatch");
        if (!all_finite(l.b))
            throw std::invalid_argument("mlp layer " + std::to_string(li) + " has non-finite bias");
        if (prev_out >= 0 && static_cast<int>(in) != prev_out)
            throw std::invalid_argument("mlp layer " + std::to_string(li) +
                                        " input width does not match previous layer output");
        prev_out = static_cast<int>(l.w.size());
    }
    in_dim_ = static_cast<int>(layers_.front().w.front().size());
    out_dim_ = static_cast<int>(layers_.back().w.size());
    if (out_dim_ < 2) throw std::invalid_argument("mlp needs at least two output classes");
}

Label MlpModel::classify(const Vec& x) const {
    Vec cur = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const MlpLayer& l = layers_[li];
        Vec next(l.w.size());
        for (std::size_t r = 0; r < l.w.size(); ++r) next[r] = dot(l.w[r], cur) + l.b[r];
        if (li + 1 < layers_.size())
            for (double& v : next) v = std::max(0.0, v);
        cur = std::move(next);
    }
    auto it = std::max_element(cur.begin(), cur.end());
    return Label{static_cast<int>(it - cur.begin())};
}

GbdtModel::GbdtModel(int num_classes, int dim, std::vector<GbdtTree> trees)
    : num_classes_(num_classes), dim_(dim), trees_(std::move(trees)) {
    if (num_classes_ < 2) throw std::invalid_argument("gbdt needs at least two classes");
    if (dim_ < 1) throw std::invalid_argument("gbdt needs a positive input dimension");
    if (trees_.empty()) throw std::invalid_argument("gbdt needs at least one tree");
    for (std::size_t ti = 0; ti < trees_.size(); ++ti) {
        const GbdtTree& t = trees_[ti];
        std::string where = "gbdt tree " + std::to_string(ti);
        if (t.class_index < 0 || t.class_index >= num_classes_)
            throw std::invalid_argument(where + " class index out of range");
        if (t.nodes.empty()) throw std::invalid_argument(where + " has no nodes");
        int n = static_cast<int>(t.nodes.size());
        for (int ni = 0; ni < n; ++ni) {
            const GbdtNode& node = t.nodes[ni];
            if (node.feat < 0) continue;  // leaf
            if (node.feat >= dim_)
                throw std::invalid_argument(where + " node " + std::to_string(ni) +
                                            " feature index exceeds input dimension");
            if (node.left <= ni || node.left >= n || node.right <= ni || node.right >= n)
                throw std::invalid_argument(where + " node " + std::to_string(ni) +
                                            " children must point forward within the tree");
        }
    }
}

Label GbdtModel::classify(const Vec& x) const {
    Vec scores(static_cast<std::size_t>(num_classes_), 0.0);
    double total = 0.0;
    for (const GbdtTree& t : trees_) {
        int ni = 0;
        while (t.nodes[ni].feat >= 0) {
            const GbdtNode& node = t.nodes[ni];
            ni = x[node.feat] < node.thr ? node.left : node.right;
        }
        double v = t.nodes[ni].leaf;
        scores[t.class_index] += v;
        total += v;
    }
    if (num_classes_ == 2) return Label{total > 0.0 ? 1 : 0};
    auto it = std::max_element(scores.begin(), scores.end());
    return Label{static_cast<int>(it - scores.begin())};
}

SyntheticLandscape::SyntheticLandscape(int d, int base_label, std::vector<Basin> basins, Vec x0)
    : d_(d), base_label_(base_label), basins_(std::move(basins)), x0_(std::move(x0)) {
    if (d_ < 1) throw std::invalid_argument("landscape needs a positive dimension");
    if (base_label_ < 0) throw std::invalid_argument("landscape base label must be non-negative");
    if (basins_.empty()) throw std::invalid_argument("landscape needs at least one basin");
    if (static_cast<int>(x0_.size()) != d_ || !all_finite(x0_))
        throw std::invalid_argument("landscape x0 must be finite with length d");
    int max_label = base_label_;
    for (std::size_t bi = 0; bi < basins_.size(); ++bi) {
        const Basin& b = basins_[bi];
        std::string where = "landscape basin " + std::to_string(bi);
        if (static_cast<int>(b.center.size()) != d_ || !all_finite(b.center))
            throw std::invalid_argument(where + " center must be finite with length d");
        if (!(b.radius > 0.0) || !std::isfinite(b.radius))
            throw std::invalid_argument(where + " radius must be positive");
        if (b.label < 0) throw std::invalid_argument(where + " label must be non-negative");
        max_label = std::max(max_label, b.label);
    }
    num_classes_ = max_label + 1;
    if (num_classes_ < 2) num_classes_ = 2;
    ground_truth_ = min_margin(basins_, x0_);
}

Label SyntheticLandscape::classify(const Vec& x) const {
    for (const Basin& b : basins_)
        if (squared_distance(x, b.center) <= b.radius * b.radius) return Label{b.label};
    return Label{base_label_};
}

double SyntheticLandscape::min_margin(const std::vector<Basin>& basins, const Vec& x0) {
    double best = std::numeric_limits<double>::infinity();
    for (const Basin& b : basins)
        best = std::min(best, std::sqrt(squared_distance(b.center, x0)) - b.radius);
    return std::max(0.0, best);
}

std::unique_ptr<VictimModel> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model file: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("model file: invalid JSON in '" + path + "': " + e.what());
    }
    if (!j.is_object()) fail("top level must be an object");
    const json& jt = require_key(j, "type", "");
    if (!jt.is_string()) fail("field 'type' must be a string");
    std::string type = jt.get<std::string>();
    if (type == "mlp") return parse_mlp(j);
    if (type == "gbdt") return parse_gbdt(j);
    if (type == "landscape") return parse_landscape(j);
    fail("unknown model type '" + type + "'");
}

void save_landscape(const SyntheticLandscape& model, const std::string& path) {
    ordered_json j;
    j["type"] = "landscape";
    j["d"] = model.dim();
    j["base_label"] = model.base_label();
    ordered_json jbasins = ordered_json::array();
    for (const Basin& b : model.basins()) {
        ordered_json jb;
        jb["center"] = b.center;
        jb["radius"] = b.radius;
        jb["label"] = b.label;
        jbasins.push_back(std::move(jb));
    }
    j["basins"] = std::move(jbasins);
    j["ground_truth"] = model.ground_truth();
    j["x0"] = model.reference_point();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

SyntheticLandscape gen_landscape(std::uint64_t seed, int d, int num_basins,
                                 std::pair<double, double> dist_range,
                                 std::pair<double, double> radius_range, Vec x0) {
    if (d < 1) throw std::invalid_argument("gen_landscape: d must be positive");
    if (num_basins < 1) throw std::invalid_argument("gen_landscape: need at least one basin");
    if (!(dist_range.first > 0.0) || !(dist_range.first < dist_range.second))
        throw std::invalid_argument("gen_landscape: dist_range must be positive with min < max");
    if (!(radius_range.first > 0.0) || !(radius_range.first < radius_range.second))
        throw std::invalid_argument("gen_landscape: radius_range must be positive with min < max");
    if (x0.empty()) x0.assign(static_cast<std::size_t>(d), 0.0);
    if (static_cast<int>(x0.size()) != d)
        throw std::invalid_argument("gen_landscape: x0 must have length d");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist_draw(dist_range.first, dist_range.second);
    std::uniform_real_distribution<double> radius_draw(radius_range.first, radius_range.second);
    const int base_label = 0;
    const int flip_label = 1;
    const int max_tries = 200;

    std::vector<Basin> basins;
    for (int bi = 0; bi < num_basins; ++bi) {
        bool placed = false;
        for (int attempt = 0; attempt < max_tries; ++attempt) {
            Vec w = unit_gaussian_vec(rng, d);
            double dist = dist_draw(rng);
            double radius = radius_draw(rng);
            if (dist <= radius) continue;  // would swallow x0
            basins.push_back(Basin{add_scaled(x0, dist, w), radius, flip_label});
            placed = true;
            break;
        }
        if (!placed)
            throw std::runtime_error("gen_landscape: no placement keeps x0 outside the ball; "
                                     "dist_range and radius_range are incompatible");
    }
    SyntheticLandscape model(d, base_label, std::move(basins), std::move(x0));
    if (!(model.ground_truth() > 0.0))
        throw std::runtime_error("gen_landscape: generated ground truth must be positive");
    return model;
}

}  // namespace bosh
