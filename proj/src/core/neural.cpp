#include "core/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "core/errors.hpp"

namespace adsim {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

constexpr double kProbEps = 1e-12;

double cross_entropy(double p, double y) {
    double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
    return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

} // namespace

NeuralNet::NeuralNet(std::vector<std::int64_t> layer_sizes, std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)), seed_(seed), rng_(seed) {
    if (layer_sizes_.size() < 2)
        throw std::invalid_argument("network needs at least input and output layers");
    for (std::int64_t s : layer_sizes_)
        if (s < 1) throw std::invalid_argument("layer sizes must be positive");
    if (layer_sizes_.back() != 1)
        throw std::invalid_argument("output layer must have width 1");

    std::size_t layers = layer_sizes_.size() - 1;
    weights_.resize(layers);
    biases_.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        std::int64_t fan_in = layer_sizes_[l];
        std::int64_t fan_out = layer_sizes_[l + 1];
        double r = std::sqrt(1.0 / static_cast<double>(fan_in));
        weights_[l].resize(static_cast<std::size_t>(fan_in * fan_out));
        for (double& w : weights_[l]) w = rng_.uniform(-r, r);
        biases_[l].assign(static_cast<std::size_t>(fan_out), 0.0);
    }
}

std::int64_t NeuralNet::parameter_count() const {
    std::int64_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l)
        count += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
    return count;
}

void NeuralNet::set_threshold(double t) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("threshold must be in (0, 1)");
    threshold_ = t;
}

double NeuralNet::forward_one(const std::vector<double>& input) const {
    if (static_cast<std::int64_t>(input.size()) != input_dim())
        throw std::invalid_argument("input dimension mismatch: got " +
                                    std::to_string(input.size()) + ", net expects " +
                                    std::to_string(input_dim()));
    std::vector<double> act = input;
    std::vector<double> next;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        std::size_t in_n = static_cast<std::size_t>(layer_sizes_[l]);
        std::size_t out_n = static_cast<std::size_t>(layer_sizes_[l + 1]);
        next.assign(out_n, 0.0);
        const std::vector<double>& w = weights_[l];
        for (std::size_t o = 0; o < out_n; ++o) {
            double z = biases_[l][o];
            const double* row = &w[o * in_n];
            for (std::size_t i = 0; i < in_n; ++i) z += row[i] * act[i];
            bool last = (l + 2 == layer_sizes_.size());
            next[o] = last ? sigmoid(z) : (z > 0.0 ? z : 0.0);
        }
        act.swap(next);
    }
    return act[0];
}

std::vector<double> NeuralNet::forward(const std::vector<std::vector<double>>& inputs) const {
    std::vector<double> scores;
    scores.reserve(inputs.size());
    for (const auto& x : inputs) scores.push_back(forward_one(x));
    return scores;
}

std::vector<double> NeuralNet::flat_parameters() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(parameter_count()));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
        flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
    }
    return flat;
}

void NeuralNet::set_flat_parameters(const std::vector<double>& params) {
    if (static_cast<std::int64_t>(params.size()) != parameter_count())
        throw std::invalid_argument("flat parameter size mismatch");
    std::size_t pos = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (double& w : weights_[l]) w = params[pos++];
        for (double& b : biases_[l]) b = params[pos++];
    }
}

void Hyperparams::validate() const {
    if (learning_rate < 0.0 || learning_rate > 0.5)
        throw std::invalid_argument("learning_rate out of [0, 0.5]");
    if (dropout < 0.0 || dropout > 0.4) throw std::invalid_argument("dropout out of [0, 0.4]");
    if (l2 < 0.0 || l2 > 0.2) throw std::invalid_argument("l2 out of [0, 0.2]");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("threshold must be in (0, 1)");
    if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
}

namespace {

struct ForwardTrace {
    // activations[0] is the input; one entry per layer after that.
    std::vector<std::vector<double>> activations;
    // Inverted-dropout scale masks for hidden layers (empty when unused).
    std::vector<std::vector<double>> masks;
};

ForwardTrace forward_traced(const NeuralNet& net, const std::vector<double>& x,
                            double dropout, Rng* rng) {
    const auto& sizes = net.layer_sizes();
    ForwardTrace tr;
    tr.activations.resize(sizes.size());
    tr.masks.resize(sizes.size() - 1);
    tr.activations[0] = x;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::size_t in_n = static_cast<std::size_t>(sizes[l]);
        std::size_t out_n = static_cast<std::size_t>(sizes[l + 1]);
        bool last = (l + 2 == sizes.size());
        std::vector<double>& out = tr.activations[l + 1];
        out.assign(out_n, 0.0);
        const std::vector<double>& w = net.weights()[l];
        for (std::size_t o = 0; o < out_n; ++o) {
            double z = net.biases()[l][o];
            const double* row = &w[o * in_n];
            const std::vector<double>& in = tr.activations[l];
            for (std::size_t i = 0; i < in_n; ++i) z += row[i] * in[i];
            out[o] = last ? sigmoid(z) : (z > 0.0 ? z : 0.0);
        }
        if (!last && dropout > 0.0 && rng != nullptr) {
            double keep = 1.0 - dropout;
            tr.masks[l].assign(out_n, 0.0);
            for (std::size_t o = 0; o < out_n; ++o) {
                if (rng->bernoulli(keep)) {
                    tr.masks[l][o] = 1.0 / keep;
                    out[o] *= tr.masks[l][o];
                } else {
                    out[o] = 0.0;
                }
            }
        }
    }
    return tr;
}

// Accumulates dJ/dparams for one sample into grad (laid out like
// flat_parameters); `scale` folds in the 1/N of the mean data loss.
void backprop_one(const NeuralNet& net, const ForwardTrace& tr, double y, double scale,
                  std::vector<std::size_t> layer_offsets, std::vector<double>& grad) {
    const auto& sizes = net.layer_sizes();
    std::size_t layers = sizes.size() - 1;

    // Output delta for sigmoid + cross-entropy: p - y.
    std::vector<double> delta{(tr.activations.back()[0] - y) * scale};
    for (std::size_t l = layers; l-- > 0;) {
        std::size_t in_n = static_cast<std::size_t>(sizes[l]);
        std::size_t out_n = static_cast<std::size_t>(sizes[l + 1]);
        const std::vector<double>& in = tr.activations[l];
        double* gw = &grad[layer_offsets[l]];
        double* gb = gw + in_n * out_n;
        for (std::size_t o = 0; o < out_n; ++o) {
            double d = delta[o];
            double* grow = gw + o * in_n;
            for (std::size_t i = 0; i < in_n; ++i) grow[i] += d * in[i];
            gb[o] += d;
        }
        if (l == 0) break;
        std::vector<double> prev(in_n, 0.0);
        const std::vector<double>& w = net.weights()[l];
        for (std::size_t i = 0; i < in_n; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < out_n; ++o) acc += w[o * in_n + i] * delta[o];
            // Through the ReLU (and the dropout mask when present). With
            // inverted dropout the post-mask activation is a positive scale
            // of the pre-mask one, so act > 0 identifies the active region.
            double act = tr.activations[l][i];
            double gate = act > 0.0 ? 1.0 : 0.0;
            if (!tr.masks[l - 1].empty()) gate *= tr.masks[l - 1][i];
            prev[i] = acc * gate;
        }
        delta.swap(prev);
    }
}

std::vector<std::size_t> parameter_layer_offsets(const NeuralNet& net) {
    const auto& sizes = net.layer_sizes();
    std::vector<std::size_t> offs(sizes.size() - 1, 0);
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        offs[l] = pos;
        pos += static_cast<std::size_t>(sizes[l] * sizes[l + 1] + sizes[l + 1]);
    }
    return offs;
}

void apply_gradient(NeuralNet& net, const std::vector<double>& grad,
                    const std::vector<std::size_t>& offsets, double lr, double l2) {
    const auto& sizes = net.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::size_t in_n = static_cast<std::size_t>(sizes[l]);
        std::size_t out_n = static_cast<std::size_t>(sizes[l + 1]);
        const double* gw = &grad[offsets[l]];
        const double* gb = gw + in_n * out_n;
        std::vector<double>& w = net.weights()[l];
        std::vector<double>& b = net.biases()[l];
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * (gw[k] + l2 * w[k]);
        for (std::size_t o = 0; o < out_n; ++o) b[o] -= lr * gb[o];
    }
}

} // namespace

double train_epoch(NeuralNet& net, const std::vector<LabeledSample>& dataset,
                   const Hyperparams& hp) {
    hp.validate();
    if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
    for (const auto& s : dataset) {
        if (static_cast<std::int64_t>(s.x.size()) != net.input_dim())
            throw std::invalid_argument("sample dimension mismatch");
        if (s.y != 0.0 && s.y != 1.0) throw std::invalid_argument("labels must be 0 or 1");
    }

    double pre_loss = 0.0;
    for (const auto& s : dataset) pre_loss += cross_entropy(net.forward_one(s.x), s.y);
    pre_loss /= static_cast<double>(dataset.size());
    if (std::isnan(pre_loss)) throw RuntimeFault("training diverged: NaN loss");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[net.rng().below(i)]);

    auto offsets = parameter_layer_offsets(net);
    std::vector<double> grad(static_cast<std::size_t>(net.parameter_count()), 0.0);
    std::size_t pos = 0;
    while (pos < order.size()) {
        std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(hp.minibatch),
                                                 order.size() - pos);
        std::fill(grad.begin(), grad.end(), 0.0);
        double inv = 1.0 / static_cast<double>(take);
        for (std::size_t k = 0; k < take; ++k) {
            const LabeledSample& s = dataset[order[pos + k]];
            ForwardTrace tr = forward_traced(net, s.x, hp.dropout,
                                             hp.dropout > 0.0 ? &net.rng() : nullptr);
            if (std::isnan(tr.activations.back()[0]))
                throw RuntimeFault("training diverged: NaN activation");
            backprop_one(net, tr, s.y, inv, offsets, grad);
        }
        apply_gradient(net, grad, offsets, hp.learning_rate, hp.l2);
        pos += take;
    }
    return pre_loss;
}

double train(NeuralNet& net, const std::vector<LabeledSample>& dataset,
             const Hyperparams& hp) {
    double loss = 0.0;
    for (std::int64_t e = 0; e < hp.epochs; ++e) loss = train_epoch(net, dataset, hp);
    return loss;
}

double training_objective(const NeuralNet& net, const std::vector<LabeledSample>& dataset,
                          double l2) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    double loss = 0.0;
    for (const auto& s : dataset) loss += cross_entropy(net.forward_one(s.x), s.y);
    loss /= static_cast<double>(dataset.size());
    double reg = 0.0;
    for (const auto& w : net.weights())
        for (double v : w) reg += v * v;
    return loss + 0.5 * l2 * reg;
}

std::vector<double> objective_gradient(const NeuralNet& net,
                                       const std::vector<LabeledSample>& dataset,
                                       double l2) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    auto offsets = parameter_layer_offsets(net);
    std::vector<double> grad(static_cast<std::size_t>(net.parameter_count()), 0.0);
    double inv = 1.0 / static_cast<double>(dataset.size());
    for (const auto& s : dataset) {
        ForwardTrace tr = forward_traced(net, s.x, 0.0, nullptr);
        backprop_one(net, tr, s.y, inv, offsets, grad);
    }
    const auto& sizes = net.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        std::size_t wn = static_cast<std::size_t>(sizes[l] * sizes[l + 1]);
        for (std::size_t k = 0; k < wn; ++k)
            grad[offsets[l] + k] += l2 * net.weights()[l][k];
    }
    return grad;
}

ClassMetrics precision_recall(const std::vector<bool>& predictions,
                              const std::vector<bool>& truths) {
    if (predictions.size() != truths.size())
        throw std::invalid_argument("predictions and truths differ in length");
    ClassMetrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] && truths[i]) ++m.tp;
        else if (predictions[i] && !truths[i]) ++m.fp;
        else if (!predictions[i] && truths[i]) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp > 0)
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0)
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

std::vector<Symptom> classify_batch(const NeuralNet& net, const FeatureBatch& batch,
                                    double threshold, double now) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("threshold must be in (0, 1)");
    (void)now;
    std::vector<Symptom> symptoms;
    for (const FeatureVector& fv : batch.vectors) {
        double score = net.forward_one(fv.values);
        if (score >= threshold) {
            Symptom s;
            s.feature = fv;
            s.timestamp = fv.window_end;
            s.ran_id = fv.ran_id;
            s.score = score;
            symptoms.push_back(std::move(s));
        }
    }
    return symptoms;
}

std::vector<LabeledSample> make_separable_dataset(std::size_t n, std::size_t dim,
                                                  std::uint64_t seed, double separation) {
    if (n == 0 || dim == 0) throw std::invalid_argument("dataset shape must be positive");
    Rng rng(seed);
    std::vector<double> direction(dim);
    double norm = 0.0;
    for (double& d : direction) {
        d = rng.normal();
        norm += d * d;
    }
    norm = std::sqrt(norm);
    for (double& d : direction) d /= norm;

    std::vector<LabeledSample> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y = (i % 2 == 0) ? 1.0 : 0.0;
        double shift = (y > 0.5 ? 0.5 : -0.5) * separation;
        data[i].x.resize(dim);
        for (std::size_t d = 0; d < dim; ++d)
            data[i].x[d] = rng.normal() + shift * direction[d];
        data[i].y = y;
    }
    return data;
}

void save_model(const NeuralNet& net, std::ostream& out) {
    out << "adsim-model 1\n";
    out << "layers";
    for (std::int64_t s : net.layer_sizes()) out << ' ' << s;
    out << '\n';
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", net.threshold());
    out << "threshold " << buf << '\n';
    out << "version " << net.version() << '\n';
    out << "params";
    for (double p : net.flat_parameters()) {
        std::snprintf(buf, sizeof(buf), "%a", p);
        out << ' ' << buf;
    }
    out << '\n';
}

NeuralNet load_model(std::istream& in) {
    std::string magic;
    int fmt = 0;
    if (!(in >> magic >> fmt) || magic != "adsim-model")
        throw ParseError("not an adsim model document");
    if (fmt != 1) throw ParseError("unsupported model format version " + std::to_string(fmt));

    std::string key;
    if (!(in >> key) || key != "layers") throw ParseError("expected 'layers'");
    std::string rest;
    std::getline(in, rest);
    std::stringstream ls(rest);
    std::vector<std::int64_t> sizes;
    std::int64_t s;
    while (ls >> s) sizes.push_back(s);
    if (sizes.size() < 2) throw ParseError("model needs at least two layers");

    if (!(in >> key) || key != "threshold") throw ParseError("expected 'threshold'");
    std::string tok;
    in >> tok;
    double threshold = std::strtod(tok.c_str(), nullptr);

    if (!(in >> key) || key != "version") throw ParseError("expected 'version'");
    int version = 0;
    in >> version;

    if (!(in >> key) || key != "params") throw ParseError("expected 'params'");
    NeuralNet net(sizes, 0);
    std::vector<double> params;
    params.reserve(static_cast<std::size_t>(net.parameter_count()));
    for (std::int64_t i = 0; i < net.parameter_count(); ++i) {
        if (!(in >> tok)) throw ParseError("model parameter list truncated");
        params.push_back(std::strtod(tok.c_str(), nullptr));
    }
    net.set_flat_parameters(params);
    net.set_threshold(threshold);
    net.set_version(version);
    return net;
}

void save_model_file(const NeuralNet& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFault("cannot write model file '" + path + "'");
    save_model(net, out);
}

NeuralNet load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    return load_model(in);
}

} // namespace adsim
