#ifndef ADSIM_CORE_NEURAL_HPP
#define ADSIM_CORE_NEURAL_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"

#include "core/batch.hpp"
#include "core/flow.hpp"
#include "core/rng.hpp"

namespace adsim {

/// Small feedforward classifier: ReLU hidden layers, logistic-sigmoid output
/// of width 1. Weights are row-major (out x in).
class NeuralNet {
public:
    /// Deterministic fan-in-scaled uniform initialization for a given seed.
    NeuralNet(std::vector<std::int64_t> layer_sizes, std::uint64_t seed);

    const std::vector<std::int64_t>& layer_sizes() const { return layer_sizes_; }
    std::int64_t input_dim() const { return layer_sizes_.front(); }
    std::int64_t parameter_count() const;

    /// One anomaly score in [0, 1] per input vector.
    std::vector<double> forward(const std::vector<std::vector<double>>& inputs) const;
    double forward_one(const std::vector<double>& input) const;

    double threshold() const { return threshold_; }
    void set_threshold(double t);
    int version() const { return version_; }
    void set_version(int v) { version_ = v; }
    std::uint64_t seed() const { return seed_; }

    // Flat parameter access (gradient checking, serialization).
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(const std::vector<double>& params);

    /// Direct access for training; weights_[l] has shape sizes[l+1] x sizes[l].
    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    Rng& rng() { return rng_; }

private:
    std::vector<std::int64_t> layer_sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
    double threshold_ = 0.5;
    int version_ = 1;
    std::uint64_t seed_ = 0;
    Rng rng_;
};

struct Hyperparams {
    double learning_rate = 0.01; // [0.001, 0.5]
    double dropout = 0.0;        // [0, 0.4], hidden layers only
    double l2 = 0.0;             // [0, 0.2], weights only
    std::int64_t epochs = 100;
    double threshold = 0.5;      // (0, 1)
    std::int64_t minibatch = 32; // samples per gradient step

    void validate() const;
};

struct LabeledSample {
    std::vector<double> x;
    double y = 0.0; // 0 or 1
};

/// One pass of shuffled mini-batch gradient descent with inverted dropout
/// and L2 weight decay. Returns the mean cross-entropy over the dataset
/// measured before this epoch's updates. Throws on divergence (NaN loss).
double train_epoch(NeuralNet& net, const std::vector<LabeledSample>& dataset,
                   const Hyperparams& hp);

/// Runs hp.epochs training passes; returns the last pre-update epoch loss.
double train(NeuralNet& net, const std::vector<LabeledSample>& dataset,
             const Hyperparams& hp);

/// Data cross-entropy plus (l2/2)*sum(w^2); the objective train_epoch descends.
double training_objective(const NeuralNet& net, const std::vector<LabeledSample>& dataset,
                          double l2);

/// Analytic gradient of training_objective w.r.t. the flat parameter vector,
/// dropout disabled.
std::vector<double> objective_gradient(const NeuralNet& net,
                                       const std::vector<LabeledSample>& dataset,
                                       double l2);

struct ClassMetrics {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

ClassMetrics precision_recall(const std::vector<bool>& predictions,
                              const std::vector<bool>& truths);

/// Anomaly notification emitted by a per-RAN detector.
struct Symptom {
    FeatureVector feature;
    double timestamp = 0.0;
    std::string ran_id;
    double score = 0.0;
    std::string anomaly_type = "binary";
};

/// Symptoms for every batch vector whose score reaches the threshold; the
/// boundary score == threshold emits. Timestamps come from window_end.
std::vector<Symptom> classify_batch(const NeuralNet& net, const FeatureBatch& batch,
                                    double threshold, double now);

/// Two gaussian blobs at +/- separation/2 along a random unit direction in
/// dim dimensions; label 1 on the positive side. Deterministic per seed.
std::vector<LabeledSample> make_separable_dataset(std::size_t n, std::size_t dim,
                                                  std::uint64_t seed,
                                                  double separation = 6.0);

/// Versioned text serialization; hexfloat parameters so load bit-round-trips
/// save.
void save_model(const NeuralNet& net, std::ostream& out);
NeuralNet load_model(std::istream& in);
void save_model_file(const NeuralNet& net, const std::string& path);
NeuralNet load_model_file(const std::string& path);

} // namespace adsim

#endif
