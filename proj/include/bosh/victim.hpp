#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bosh/vecmath.hpp"

namespace bosh {

struct Label {
    int value = -1;
    friend bool operator==(const Label& a, const Label& b) { return a.value == b.value; }
    friend bool operator!=(const Label& a, const Label& b) { return a.value != b.value; }
};

// Exact query counter; every predict() adds exactly one.
struct QueryLedger {
    std::uint64_t count = 0;
};

class VictimModel {
public:
    virtual ~VictimModel() = default;
    virtual int dim() const = 0;
    virtual int num_classes() const = 0;
    // Raw decision with no side effects; all counted access goes through predict().
    virtual Label classify(const Vec& x) const = 0;
};

// The only counted entry point to a model. Throws on dimension mismatch.
Label predict(const VictimModel& model, const Vec& x, QueryLedger& ledger);

struct MlpLayer {
    std::vector<Vec> w;  // row-major, w[out][in]
    Vec b;
};

class MlpModel final : public VictimModel {
public:
    explicit MlpModel(std::vector<MlpLayer> layers);
    int dim() const override { return in_dim_; }
    int num_classes() const override { return out_dim_; }
    Label classify(const Vec& x) const override;
    const std::vector<MlpLayer>& layers() const { return layers_; }

private:
    std::vector<MlpLayer> layers_;
    int in_dim_ = 0;
    int out_dim_ = 0;
};

struct GbdtNode {
    int feat = -1;  // negative marks a leaf
    double thr = 0.0;
    int left = -1;
    int right = -1;
    double leaf = 0.0;
};

struct GbdtTree {
    int class_index = 0;
    std::vector<GbdtNode> nodes;  // node 0 is the root; children point forward
};

class GbdtModel final : public VictimModel {
public:
    GbdtModel(int num_classes, int dim, std::vector<GbdtTree> trees);
    int dim() const override { return dim_; }
    int num_classes() const override { return num_classes_; }
    // Argmax of per-class summed scores; two-class models use the sign of the
    // total score (positive -> class 1).
    Label classify(const Vec& x) const override;
    const std::vector<GbdtTree>& trees() const { return trees_; }

private:
    int num_classes_ = 2;
    int dim_ = 0;
    std::vector<GbdtTree> trees_;
};

struct Basin {
    Vec center;
    double radius = 0.0;
    int label = 0;
};

// Union-of-balls landscape: inside any basin the label flips to that basin's
// label (first basin in list order wins on overlap); on-sphere counts as inside.
class SyntheticLandscape final : public VictimModel {
public:
    SyntheticLandscape(int d, int base_label, std::vector<Basin> basins, Vec x0);
    int dim() const override { return d_; }
    int num_classes() const override { return num_classes_; }
    Label classify(const Vec& x) const override;

    const std::vector<Basin>& basins() const { return basins_; }
    const Vec& reference_point() const { return x0_; }
    int base_label() const { return base_label_; }
    // min over basins of (||center - x0|| - radius), clamped at 0.
    double ground_truth() const { return ground_truth_; }

    static double min_margin(const std::vector<Basin>& basins, const Vec& x0);

private:
    int d_ = 0;
    int base_label_ = 0;
    int num_classes_ = 2;
    std::vector<Basin> basins_;
    Vec x0_;
    double ground_truth_ = 0.0;
};

// Parses a model file ({"type": "mlp" | "gbdt" | "landscape", ...}).
// Throws std::runtime_error naming the offending field on parse or
// validation failure.
std::unique_ptr<VictimModel> load_model(const std::string& path);

void save_landscape(const SyntheticLandscape& model, const std::string& path);

// Random landscape: each basin center sits at a distance drawn from
// dist_range along a uniform random direction, with radius drawn from
// radius_range; placements that would swallow x0 are redrawn (bounded).
SyntheticLandscape gen_landscape(std::uint64_t seed, int d, int num_basins,
                                 std::pair<double, double> dist_range,
                                 std::pair<double, double> radius_range, Vec x0);

}  // namespace bosh
