#include "steode/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace steode::model {

std::string_view slot_name(Slot slot) {
    switch (slot) {
    case kW: return "W";
    case kGamma: return "gamma";
    case kW1: return "mlp.W1";
    case kB1: return "mlp.b1";
    case kW2: return "mlp.W2";
    case kB2: return "mlp.b2";
    }
    return "unknown";
}

Mat& ModelParams::tensor(Slot slot) {
    return const_cast<Mat&>(static_cast<const ModelParams&>(*this).tensor(slot));
}

const Mat& ModelParams::tensor(Slot slot) const {
    switch (slot) {
    case kW: return W;
    case kGamma: return gamma;
    case kW1: return mlp.W1;
    case kB1: return mlp.b1;
    case kW2: return mlp.W2;
    case kB2: return mlp.b2;
    }
    throw std::out_of_range("ModelParams::tensor: unknown slot");
}

Dimensions ModelParams::dims() const {
    return Dimensions{gamma.rows(), W.rows(), W.cols(), mlp.W1.cols(), mlp.W2.cols()};
}

namespace {

Mat glorot(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = dist(rng);
    return m;
}

} // namespace

ModelParams ModelParams::init(const Dimensions& dims, double lambda, std::mt19937_64& rng) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("ModelParams::init: lambda must lie in [0,1]");
    if (dims.nodes < 1 || dims.features < 1 || dims.embedding < 1 || dims.hidden < 1 || dims.outputs < 1)
        throw std::invalid_argument("ModelParams::init: all dimensions must be positive");
    ModelParams p;
    p.W = glorot(dims.features, dims.embedding, rng);
    p.gamma = Mat::Ones(dims.nodes, dims.nodes);
    p.lambda = lambda;
    p.mlp.W1 = glorot(dims.embedding, dims.hidden, rng);
    p.mlp.b1 = Mat::Zero(1, dims.hidden);
    p.mlp.W2 = glorot(dims.hidden, dims.outputs, rng);
    p.mlp.b2 = Mat::Zero(1, dims.outputs);
    return p;
}

Mat gaussian_features(Eigen::Index nodes, Eigen::Index features, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat x(nodes, features);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x.data()[i] = dist(rng);
    return x;
}

BoundParams bind(Tape& tape, const ModelParams& params) {
    return BoundParams{tape.parameter(params.W, kW),         tape.parameter(params.gamma, kGamma),
                       tape.parameter(params.mlp.W1, kW1),   tape.parameter(params.mlp.b1, kB1),
                       tape.parameter(params.mlp.W2, kW2),   tape.parameter(params.mlp.b2, kB2),
                       params.lambda};
}

Var mix_directions(const Var& a_f, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("mix_directions: lambda must lie in [0,1]");
    if (a_f.rows() != a_f.cols())
        throw lingrad::ShapeError("mix_directions: effective adjacency must be square");
    return lingrad::affine_combine(a_f, lingrad::transpose(a_f), lambda, 1.0 - lambda);
}

Var embed_layer(const Var& a_s, const Var& a_f, const Var& x, const BoundParams& p) {
    if (a_s.rows() != a_s.cols())
        throw lingrad::ShapeError("embed_layer: structural adjacency must be square");
    const Var mask = lingrad::hadamard(p.gamma, lingrad::hadamard(a_s, mix_directions(a_f, p.lambda)));
    return lingrad::relu(lingrad::matmul(lingrad::matmul(mask, x), p.W));
}

Var unroll(const std::vector<Var>& series, const Var& a_s, const Var& x, const BoundParams& p) {
    if (series.empty())
        throw std::invalid_argument("unroll: effective series is empty");
    Tape& tape = *a_s.tape();
    Var state = tape.constant(Mat::Zero(x.rows(), p.W.cols()));
    for (const Var& a_f : series)
        state = lingrad::add(state, embed_layer(a_s, a_f, x, p));
    return state;
}

Var global_pool(const Var& z) { return lingrad::row_mean(z); }

Var head_forward(const Var& pooled, const BoundParams& p, const Task& task) {
    if (task.outputs < 1)
        throw std::invalid_argument("head_forward: output width must be at least 1");
    if (p.W2.cols() != task.outputs) {
        std::ostringstream os;
        os << "head_forward: head has " << p.W2.cols() << " outputs but task expects " << task.outputs;
        throw lingrad::ShapeError(os.str());
    }
    const Var hidden = lingrad::relu(lingrad::add(lingrad::matmul(pooled, p.W1), p.b1));
    const Var out = lingrad::add(lingrad::matmul(hidden, p.W2), p.b2);
    return task.kind == TaskKind::classification ? lingrad::log_softmax(out) : out;
}

Var loss(const Var& out, const Label& y, const Task& task) {
    Tape& tape = *out.tape();
    if (task.kind == TaskKind::classification) {
        const int k = y.class_index();
        if (k < 0 || k >= out.cols() || static_cast<double>(k) != y.value) {
            std::ostringstream os;
            os << "loss: class index " << y.value << " out of range for " << out.cols() << " classes";
            throw std::out_of_range(os.str());
        }
        Mat pick = Mat::Zero(1, out.cols());
        pick(0, k) = -1.0;
        return lingrad::sum(lingrad::hadamard(out, tape.constant(std::move(pick))));
    }
    const Var diff = lingrad::affine_combine(out, tape.constant(Mat::Constant(1, 1, y.value)), 1.0, -1.0);
    return lingrad::hadamard(diff, diff);
}

namespace {

struct NoGradTape {
    Tape tape;
    NoGradTape() { tape.set_grad_enabled(false); }
};

} // namespace

Mat mix_directions(const Mat& a_f, double lambda) {
    NoGradTape t;
    return mix_directions(t.tape.constant(a_f), lambda).value();
}

Mat embed_layer(const Mat& a_s, const Mat& a_f, const Mat& x, const ModelParams& params) {
    NoGradTape t;
    const BoundParams p = bind(t.tape, params);
    return embed_layer(t.tape.constant(a_s), t.tape.constant(a_f), t.tape.constant(x), p).value();
}

Mat unroll(const std::vector<Mat>& series, const Mat& a_s, const Mat& x, const ModelParams& params) {
    NoGradTape t;
    const BoundParams p = bind(t.tape, params);
    std::vector<Var> vars;
    vars.reserve(series.size());
    for (const Mat& a : series)
        vars.push_back(t.tape.constant(a));
    return unroll(vars, t.tape.constant(a_s), t.tape.constant(x), p).value();
}

Mat global_pool(const Mat& z) {
    NoGradTape t;
    return global_pool(t.tape.constant(z)).value();
}

Mat head_forward(const Mat& pooled, const ModelParams& params, const Task& task) {
    NoGradTape t;
    const BoundParams p = bind(t.tape, params);
    return head_forward(t.tape.constant(pooled), p, task).value();
}

double loss(const Mat& out, const Label& y, const Task& task) {
    NoGradTape t;
    return loss(t.tape.constant(out), y, task).value()(0, 0);
}

namespace {

Var subject_output(Tape& tape, const SubjectGraphs& subject, const Mat& x, const BoundParams& p,
                   const Task& task) {
    std::vector<Var> series;
    series.reserve(subject.effective.size());
    for (const Mat& a : subject.effective)
        series.push_back(tape.constant(a));
    const Var z = unroll(series, tape.constant(subject.structural), tape.constant(x), p);
    return head_forward(global_pool(z), p, task);
}

} // namespace

Mat predict(const SubjectGraphs& subject, const Mat& x, const ModelParams& params, const Task& task) {
    NoGradTape t;
    const BoundParams p = bind(t.tape, params);
    return subject_output(t.tape, subject, x, p, task).value();
}

SubjectEvaluation evaluate_subject(const SubjectGraphs& subject, const Mat& x, const ModelParams& params,
                                   const Label& y, const Task& task) {
    Tape tape;
    const BoundParams p = bind(tape, params);
    const Var out = subject_output(tape, subject, x, p, task);
    const Var l = loss(out, y, task);
    return SubjectEvaluation{l.value()(0, 0), out.value(), tape.backward(l)};
}

double decode_output(const Mat& output, const Task& task) {
    if (task.kind == TaskKind::regression)
        return output(0, 0);
    Eigen::Index best = 0;
    output.row(0).maxCoeff(&best);
    return static_cast<double>(best);
}

} // namespace steode::model
