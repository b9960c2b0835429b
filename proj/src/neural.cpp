#include "aadtcast/neural.hpp"

#include "aadtcast/error.hpp"
#include "aadtcast/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace aadt {

namespace {

using Vec = Eigen::VectorXd;
using MapVec = Eigen::Map<Vec>;
using CMapVec = Eigen::Map<const Vec>;
using Idx = Eigen::Index;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void sigmoid_inplace(Eigen::Ref<Vec> v) {
  for (Idx i = 0; i < v.size(); ++i) v(i) = sigmoid(v(i));
}

void tanh_inplace(Eigen::Ref<Vec> v) {
  for (Idx i = 0; i < v.size(); ++i) v(i) = std::tanh(v(i));
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Runs one executed step. `gates` receives the activated gate values and
/// `aux` the per-cell extra (r.h for GRU, tanh(c) for LSTM).
void run_step(const ModelParams& p, double x, const double* h_prev, const double* c_prev,
              double* gates, double* h, double* c, double* aux) {
  const auto H = static_cast<Idx>(p.hidden_size());
  const auto wx = p.input_weights();
  const auto wh = p.recurrent_weights();
  const auto b = p.bias();
  CMapVec hp(h_prev, H);
  MapVec hn(h, H);

  switch (p.cell_kind()) {
    case CellKind::SimpleRnn: {
      MapVec g(gates, H);
      g.noalias() = wx * x + b;
      g.noalias() += wh * hp;
      tanh_inplace(g);
      hn = g;
      break;
    }
    case CellKind::Lstm: {
      MapVec g(gates, 4 * H);
      g.noalias() = wx * x + b;
      g.noalias() += wh * hp;
      sigmoid_inplace(g.segment(0, 2 * H));
      tanh_inplace(g.segment(2 * H, H));
      sigmoid_inplace(g.segment(3 * H, H));
      CMapVec cp(c_prev, H);
      MapVec cn(c, H);
      MapVec tc(aux, H);
      cn = g.segment(H, H).cwiseProduct(cp) + g.segment(0, H).cwiseProduct(g.segment(2 * H, H));
      for (Idx i = 0; i < H; ++i) tc(i) = std::tanh(cn(i));
      hn = g.segment(3 * H, H).cwiseProduct(tc);
      break;
    }
    case CellKind::Gru: {
      MapVec g(gates, 3 * H);
      MapVec rh(aux, H);
      g.head(2 * H).noalias() = wx.head(2 * H) * x + b.head(2 * H);
      g.head(2 * H).noalias() += wh.topRows(2 * H) * hp;
      sigmoid_inplace(g.head(2 * H));
      rh = g.segment(H, H).cwiseProduct(hp);
      g.tail(H).noalias() = wx.tail(H) * x + b.tail(H);
      g.tail(H).noalias() += wh.bottomRows(H) * rh;
      tanh_inplace(g.tail(H));
      const auto z = g.head(H);
      hn = (Vec::Ones(H) - z).cwiseProduct(hp) + z.cwiseProduct(g.tail(H));
      break;
    }
  }
}

void require_finite_input(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::NumericDomain, "recurrent input is not finite");
}

bool is_masked(std::span<const std::uint8_t> mask, std::size_t t) {
  return !mask.empty() && mask[t] == 0;
}

bool target_present(std::span<const std::uint8_t> mask, std::size_t t) {
  return mask.empty() || mask[t] != 0;
}

void require_sequence_shape(const SequenceView& seq) {
  const std::size_t n = seq.inputs.size();
  if ((!seq.input_mask.empty() && seq.input_mask.size() != n) || seq.targets.size() != n ||
      (!seq.target_mask.empty() && seq.target_mask.size() != n)) {
    throw Error(ErrorCode::ShapeMismatch, "sequence inputs, targets and masks differ in length");
  }
}

}  // namespace

std::string_view cell_kind_name(CellKind kind) noexcept {
  switch (kind) {
    case CellKind::SimpleRnn: return "SimpleRnn";
    case CellKind::Gru: return "Gru";
    case CellKind::Lstm: return "Lstm";
  }
  return "SimpleRnn";
}

std::optional<CellKind> parse_cell_kind(std::string_view name) noexcept {
  std::string key(name);
  for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (key == "simplernn" || key == "rnn" || key == "simple") return CellKind::SimpleRnn;
  if (key == "gru") return CellKind::Gru;
  if (key == "lstm") return CellKind::Lstm;
  return std::nullopt;
}

std::size_t gate_count(CellKind kind) noexcept {
  switch (kind) {
    case CellKind::SimpleRnn: return 1;
    case CellKind::Gru: return 3;
    case CellKind::Lstm: return 4;
  }
  return 1;
}

// ─── ModelParams ─────────────────────────────────────────────────────────────

ModelParams::ModelParams(CellKind kind, std::size_t hidden_size) : kind_(kind), hidden_(hidden_size) {
  if (hidden_size == 0) throw Error(ErrorCode::InvalidArgument, "hidden size must be positive");
  const std::size_t g = gate_count(kind);
  data_.assign(g * hidden_ + g * hidden_ * hidden_ + g * hidden_ + hidden_ + 1, 0.0);
}

ModelParams ModelParams::initialized(CellKind kind, std::size_t hidden_size, std::uint64_t seed) {
  ModelParams p(kind, hidden_size);
  Rng rng(derive_seed(seed, 0x1417ULL));
  const auto H = static_cast<Idx>(hidden_size);
  const auto G = static_cast<Idx>(p.gates());

  const double input_limit = std::sqrt(6.0 / (1.0 + static_cast<double>(G * H)));
  auto wx = p.input_weights();
  for (Idx i = 0; i < wx.size(); ++i) wx(i) = rng.uniform(-input_limit, input_limit);

  auto wh = p.recurrent_weights();
  for (Idx g = 0; g < G; ++g) {
    Eigen::MatrixXd gauss(H, H);
    for (Idx r = 0; r < H; ++r) {
      for (Idx c = 0; c < H; ++c) gauss(r, c) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd& rmat = qr.matrixQR();
    for (Idx c = 0; c < H; ++c) {
      if (rmat(c, c) < 0.0) q.col(c) *= -1.0;
    }
    wh.block(g * H, 0, H, H) = q;
  }

  const double dense_limit = std::sqrt(6.0 / (static_cast<double>(H) + 1.0));
  auto dw = p.dense_weight();
  for (Idx i = 0; i < dw.size(); ++i) dw(i) = rng.uniform(-dense_limit, dense_limit);

  if (kind == CellKind::Lstm) p.bias().segment(H, H).setOnes();
  return p;
}

std::array<ParamBlock, 5> ModelParams::blocks() const noexcept {
  const std::size_t g = gates();
  return {ParamBlock{"input_weights", 0, g * hidden_},
          ParamBlock{"recurrent_weights", offset_recurrent(), g * hidden_ * hidden_},
          ParamBlock{"bias", offset_bias(), g * hidden_},
          ParamBlock{"dense_weight", offset_dense(), hidden_},
          ParamBlock{"dense_bias", offset_dense() + hidden_, 1}};
}

Eigen::Map<Eigen::VectorXd> ModelParams::input_weights() {
  return {data_.data(), static_cast<Idx>(gates() * hidden_)};
}
Eigen::Map<const Eigen::VectorXd> ModelParams::input_weights() const {
  return {data_.data(), static_cast<Idx>(gates() * hidden_)};
}
Eigen::Map<RowMatrix> ModelParams::recurrent_weights() {
  return {data_.data() + offset_recurrent(), static_cast<Idx>(gates() * hidden_), static_cast<Idx>(hidden_)};
}
Eigen::Map<const RowMatrix> ModelParams::recurrent_weights() const {
  return {data_.data() + offset_recurrent(), static_cast<Idx>(gates() * hidden_), static_cast<Idx>(hidden_)};
}
Eigen::Map<Eigen::VectorXd> ModelParams::bias() {
  return {data_.data() + offset_bias(), static_cast<Idx>(gates() * hidden_)};
}
Eigen::Map<const Eigen::VectorXd> ModelParams::bias() const {
  return {data_.data() + offset_bias(), static_cast<Idx>(gates() * hidden_)};
}
Eigen::Map<Eigen::VectorXd> ModelParams::dense_weight() {
  return {data_.data() + offset_dense(), static_cast<Idx>(hidden_)};
}
Eigen::Map<const Eigen::VectorXd> ModelParams::dense_weight() const {
  return {data_.data() + offset_dense(), static_cast<Idx>(hidden_)};
}

void ModelParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ModelParams::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

CellState CellState::zeros(const ModelParams& params) {
  CellState s;
  s.hidden = Vec::Zero(static_cast<Idx>(params.hidden_size()));
  if (params.cell_kind() == CellKind::Lstm) s.cell_memory = Vec::Zero(static_cast<Idx>(params.hidden_size()));
  return s;
}

// ─── Forward ─────────────────────────────────────────────────────────────────

StepOutput cell_step(const ModelParams& params, double x, const CellState& state, bool masked) {
  const auto H = static_cast<Idx>(params.hidden_size());
  if (state.hidden.size() != H ||
      (params.cell_kind() == CellKind::Lstm && state.cell_memory.size() != H)) {
    throw Error(ErrorCode::ShapeMismatch, "cell state does not match parameters");
  }
  if (masked) return StepOutput{state.hidden, state, true};
  require_finite_input(x);

  Vec gates(static_cast<Idx>(params.gates()) * H);
  Vec aux(H);
  StepOutput out;
  out.next_state.hidden.resize(H);
  const Vec zero_c = Vec::Zero(H);
  const double* c_prev = zero_c.data();
  Vec c_next(H);
  if (params.cell_kind() == CellKind::Lstm) c_prev = state.cell_memory.data();
  run_step(params, x, state.hidden.data(), c_prev, gates.data(), out.next_state.hidden.data(),
           c_next.data(), aux.data());
  if (params.cell_kind() == CellKind::Lstm) out.next_state.cell_memory = c_next;
  out.hidden = out.next_state.hidden;
  return out;
}

ForwardResult forward(const ModelParams& params, std::span<const double> inputs,
                      std::span<const std::uint8_t> input_mask) {
  if (!input_mask.empty() && input_mask.size() != inputs.size()) {
    throw Error(ErrorCode::ShapeMismatch, "input mask length differs from inputs");
  }
  const auto H = static_cast<Idx>(params.hidden_size());
  Vec h = Vec::Zero(H);
  Vec c = Vec::Zero(H);
  Vec h_next(H);
  Vec c_next(H);
  Vec gates(static_cast<Idx>(params.gates()) * H);
  Vec aux(H);
  const auto dw = params.dense_weight();
  const double db = params.dense_bias();

  ForwardResult out;
  out.predictions.resize(inputs.size());
  out.eligible.resize(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (!is_masked(input_mask, t)) {
      require_finite_input(inputs[t]);
      run_step(params, inputs[t], h.data(), c.data(), gates.data(), h_next.data(), c_next.data(),
               aux.data());
      h.swap(h_next);
      c.swap(c_next);
      out.eligible[t] = 1;
    }
    out.predictions[t] = dw.dot(h) + db;
  }
  return out;
}

LossValue mae_loss(std::span<const double> predictions, std::span<const std::optional<double>> targets,
                   std::span<const std::uint8_t> eligible) {
  if (predictions.size() != targets.size() || (!eligible.empty() && eligible.size() != targets.size())) {
    throw Error(ErrorCode::ShapeMismatch, "predictions and targets differ in length");
  }
  LossValue lv;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!targets[t] || is_masked(eligible, t)) continue;
    lv.loss += std::abs(predictions[t] - *targets[t]);
    ++lv.count;
  }
  if (lv.count == 0) throw Error(ErrorCode::EmptyLoss, "no position contributes to the loss");
  lv.loss /= static_cast<double>(lv.count);
  return lv;
}

LossValue sequence_loss(const ModelParams& params, const SequenceView& seq) {
  require_sequence_shape(seq);
  const ForwardResult fr = forward(params, seq.inputs, seq.input_mask);
  LossValue lv;
  for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
    if (!fr.eligible[t] || !target_present(seq.target_mask, t)) continue;
    lv.loss += std::abs(fr.predictions[t] - seq.targets[t]);
    ++lv.count;
  }
  if (lv.count) lv.loss /= static_cast<double>(lv.count);
  return lv;
}

// ─── Backward ────────────────────────────────────────────────────────────────

void BpttWorkspace::reserve(std::size_t steps, std::size_t gate_rows, std::size_t hidden) {
  gates_.resize(steps * gate_rows);
  hidden_.resize(steps * hidden);
  cell_.resize(steps * hidden);
  aux_.resize(steps * hidden);
  x_.resize(steps);
  dy_.resize(steps);
  steps_.resize(steps);
}

LossValue accumulate_gradient(const ModelParams& params, const SequenceView& seq,
                              ModelParams& gradient, BpttWorkspace& ws) {
  require_sequence_shape(seq);
  if (!params.same_shape(gradient)) {
    throw Error(ErrorCode::ShapeMismatch, "gradient buffer does not match parameters");
  }
  const std::size_t n = seq.inputs.size();
  const std::size_t hs = params.hidden_size();
  const std::size_t gr = params.gates() * hs;
  const auto H = static_cast<Idx>(hs);
  ws.reserve(n, gr, hs);

  const Vec zero = Vec::Zero(H);
  const auto dw = params.dense_weight();
  const double db = params.dense_bias();

  // Forward over executed steps only, caching activations.
  std::size_t executed = 0;
  LossValue lv;
  for (std::size_t t = 0; t < n; ++t) {
    if (is_masked(seq.input_mask, t)) continue;
    require_finite_input(seq.inputs[t]);
    const double* h_prev = executed ? &ws.hidden_[(executed - 1) * hs] : zero.data();
    const double* c_prev = executed ? &ws.cell_[(executed - 1) * hs] : zero.data();
    run_step(params, seq.inputs[t], h_prev, c_prev, &ws.gates_[executed * gr], &ws.hidden_[executed * hs],
             &ws.cell_[executed * hs], &ws.aux_[executed * hs]);
    ws.x_[executed] = seq.inputs[t];
    ws.steps_[executed] = t;
    const double y = dw.dot(CMapVec(&ws.hidden_[executed * hs], H)) + db;
    if (target_present(seq.target_mask, t)) {
      const double r = y - seq.targets[t];
      lv.loss += std::abs(r);
      ++lv.count;
      ws.dy_[executed] = sign_of(r);
    } else {
      ws.dy_[executed] = 0.0;
    }
    ++executed;
  }
  if (lv.count == 0) return lv;
  const double scale = 1.0 / static_cast<double>(lv.count);
  lv.loss *= scale;

  auto g_wx = gradient.input_weights();
  auto g_wh = gradient.recurrent_weights();
  auto g_b = gradient.bias();
  auto g_dw = gradient.dense_weight();
  const auto wh = params.recurrent_weights();

  Vec dh_next = Vec::Zero(H);
  Vec dc_next = Vec::Zero(H);
  Vec dh(H);
  Vec dpre(static_cast<Idx>(gr));
  Vec dhp(H);

  for (std::size_t k = executed; k-- > 0;) {
    const double dy = ws.dy_[k] * scale;
    CMapVec hk(&ws.hidden_[k * hs], H);
    CMapVec hp(k ? &ws.hidden_[(k - 1) * hs] : zero.data(), H);
    CMapVec gates(&ws.gates_[k * gr], static_cast<Idx>(gr));
    CMapVec aux(&ws.aux_[k * hs], H);
    const double x = ws.x_[k];

    dh = dh_next;
    if (dy != 0.0) {
      dh.noalias() += dy * dw;
      g_dw.noalias() += dy * hk;
      gradient.dense_bias() += dy;
    }

    switch (params.cell_kind()) {
      case CellKind::SimpleRnn: {
        dpre = dh.cwiseProduct((Vec::Ones(H) - gates.cwiseAbs2()));
        g_wh.noalias() += dpre * hp.transpose();
        dh_next.noalias() = wh.transpose() * dpre;
        break;
      }
      case CellKind::Lstm: {
        CMapVec cp(k ? &ws.cell_[(k - 1) * hs] : zero.data(), H);
        const auto i = gates.segment(0, H);
        const auto f = gates.segment(H, H);
        const auto g = gates.segment(2 * H, H);
        const auto o = gates.segment(3 * H, H);
        const Vec dc = dh.cwiseProduct(o).cwiseProduct(Vec::Ones(H) - aux.cwiseAbs2()) + dc_next;
        dpre.segment(0, H) = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct(Vec::Ones(H) - i));
        dpre.segment(H, H) = dc.cwiseProduct(cp).cwiseProduct(f.cwiseProduct(Vec::Ones(H) - f));
        dpre.segment(2 * H, H) = dc.cwiseProduct(i).cwiseProduct(Vec::Ones(H) - g.cwiseAbs2());
        dpre.segment(3 * H, H) = dh.cwiseProduct(aux).cwiseProduct(o.cwiseProduct(Vec::Ones(H) - o));
        dc_next = dc.cwiseProduct(f);
        g_wh.noalias() += dpre * hp.transpose();
        dh_next.noalias() = wh.transpose() * dpre;
        break;
      }
      case CellKind::Gru: {
        const auto z = gates.segment(0, H);
        const auto r = gates.segment(H, H);
        const auto cand = gates.segment(2 * H, H);
        dpre.segment(2 * H, H) = dh.cwiseProduct(z).cwiseProduct(Vec::Ones(H) - cand.cwiseAbs2());
        const Vec d_rh = wh.bottomRows(H).transpose() * dpre.segment(2 * H, H);
        const Vec dz = dh.cwiseProduct(cand - hp);
        const Vec dr = d_rh.cwiseProduct(hp);
        dpre.segment(0, H) = dz.cwiseProduct(z.cwiseProduct(Vec::Ones(H) - z));
        dpre.segment(H, H) = dr.cwiseProduct(r.cwiseProduct(Vec::Ones(H) - r));
        dhp = dh.cwiseProduct(Vec::Ones(H) - z) + d_rh.cwiseProduct(r);
        dhp.noalias() += wh.topRows(2 * H).transpose() * dpre.head(2 * H);
        g_wh.topRows(2 * H).noalias() += dpre.head(2 * H) * hp.transpose();
        g_wh.bottomRows(H).noalias() += dpre.tail(H) * aux.transpose();
        dh_next = dhp;
        break;
      }
    }
    g_wx.noalias() += x * dpre;
    g_b += dpre;
  }
  return lv;
}

BackwardResult backward(const ModelParams& params, const SequenceView& seq) {
  BackwardResult out{{}, ModelParams(params.cell_kind(), params.hidden_size())};
  BpttWorkspace ws;
  out.loss = accumulate_gradient(params, seq, out.gradient, ws);
  if (out.loss.count == 0) throw Error(ErrorCode::EmptyLoss, "no position contributes to the loss");
  return out;
}

// ─── Adam ────────────────────────────────────────────────────────────────────

AdamState AdamState::for_params(const ModelParams& params, double learning_rate) {
  AdamState s;
  s.first_moment.assign(params.size(), 0.0);
  s.second_moment.assign(params.size(), 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(ModelParams& params, const ModelParams& gradient, AdamState& state) {
  if (!params.same_shape(gradient) || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  auto theta = params.data();
  const auto g = gradient.data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g[i];
    v = state.beta2 * v + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    theta[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// ─── Gradient check ──────────────────────────────────────────────────────────

GradientCheckReport compare_gradients(const ModelParams& params, const SequenceView& seq,
                                      const ModelParams& analytic, double fd_step, double tolerance) {
  if (!params.same_shape(analytic)) {
    throw Error(ErrorCode::ShapeMismatch, "analytic gradient does not match parameters");
  }
  ModelParams probe = params;
  GradientCheckReport report;
  for (const ParamBlock& block : params.blocks()) {
    BlockCheck check{std::string(block.name), 0.0, true};
    for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
      const double saved = probe.data()[i];
      probe.data()[i] = saved + fd_step;
      const LossValue up = sequence_loss(probe, seq);
      probe.data()[i] = saved - fd_step;
      const LossValue down = sequence_loss(probe, seq);
      probe.data()[i] = saved;
      if (up.count == 0 || down.count == 0) {
        throw Error(ErrorCode::EmptyLoss, "gradient check: sequence has no loss positions");
      }
      const double numeric = (up.loss - down.loss) / (2.0 * fd_step);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
    }
    check.passed = check.max_relative_error < tolerance;
    report.passed = report.passed && check.passed;
    report.blocks.push_back(std::move(check));
  }
  return report;
}

GradientCheckReport gradient_check(const ModelParams& params, const SequenceView& seq, double fd_step,
                                   double tolerance) {
  const BackwardResult br = backward(params, seq);
  return compare_gradients(params, seq, br.gradient, fd_step, tolerance);
}

GradientSuiteReport gradient_check_suite(CellKind kind, int seeds, std::size_t hidden_size,
                                         std::size_t length, double tolerance) {
  GradientSuiteReport report;
  report.cell = kind;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(0x6a0c, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(kind)));
    ModelParams params(kind, hidden_size);
    for (double& v : params.data()) v = rng.uniform(-0.5, 0.5);
    std::vector<double> inputs(length);
    std::vector<double> targets(length);
    Mask input_mask(length, 1);
    Mask target_mask(length, 1);
    for (std::size_t t = 0; t < length; ++t) {
      inputs[t] = rng.uniform(-1.0, 1.0);
      targets[t] = rng.uniform(-1.0, 1.0);
      if (t > 0 && rng.uniform() < 0.15) input_mask[t] = 0;
      if (rng.uniform() < 0.15) target_mask[t] = 0;
    }
    target_mask[0] = 1;
    const SequenceView seq{inputs, input_mask, targets, target_mask};
    const GradientCheckReport r = gradient_check(params, seq, 1e-5, tolerance);
    for (const BlockCheck& b : r.blocks) {
      report.max_relative_error = std::max(report.max_relative_error, b.max_relative_error);
    }
    report.passed = report.passed && r.passed;
    ++report.cases;
  }
  return report;
}

// ─── Serialization ───────────────────────────────────────────────────────────

namespace {

std::string hex_double(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

double parse_double_token(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw Error(ErrorCode::MalformedModel, "bad numeric token '" + token + "'");
  }
  return v;
}

std::string expect_word(std::istream& in, std::string_view expected) {
  std::string word;
  if (!(in >> word) || (!expected.empty() && word != expected)) {
    throw Error(ErrorCode::MalformedModel,
                "expected '" + std::string(expected) + "' in parameter record, got '" + word + "'");
  }
  return word;
}

}  // namespace

void write_params(std::ostream& out, const ModelParams& params) {
  out << "params 1\n";
  out << "cell " << cell_kind_name(params.cell_kind()) << "\n";
  out << "hidden " << params.hidden_size() << "\n";
  for (const ParamBlock& block : params.blocks()) {
    out << block.name << ' ' << block.size;
    for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
      out << ' ' << hex_double(params.data()[i]);
    }
    out << '\n';
  }
  out << "end_params\n";
}

ModelParams read_params(std::istream& in) {
  expect_word(in, "params");
  if (expect_word(in, "") != "1") throw Error(ErrorCode::MalformedModel, "unsupported parameter version");
  expect_word(in, "cell");
  const auto kind = parse_cell_kind(expect_word(in, ""));
  if (!kind) throw Error(ErrorCode::MalformedModel, "unknown cell kind");
  expect_word(in, "hidden");
  const std::string hidden_token = expect_word(in, "");
  const auto hidden = static_cast<std::size_t>(std::strtoull(hidden_token.c_str(), nullptr, 10));
  if (hidden == 0) throw Error(ErrorCode::MalformedModel, "bad hidden size");
  ModelParams params(*kind, hidden);
  for (const ParamBlock& block : params.blocks()) {
    expect_word(in, block.name);
    const std::string count = expect_word(in, "");
    if (std::strtoull(count.c_str(), nullptr, 10) != block.size) {
      throw Error(ErrorCode::MalformedModel, "block " + std::string(block.name) + " has the wrong size");
    }
    for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
      params.data()[i] = parse_double_token(expect_word(in, ""));
    }
  }
  expect_word(in, "end_params");
  if (!params.all_finite()) throw Error(ErrorCode::MalformedModel, "non-finite weight in record");
  return params;
}

}  // namespace aadt
