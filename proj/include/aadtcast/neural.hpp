#pragma once

#include "aadtcast/series.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aadt {

enum class CellKind { SimpleRnn, Gru, Lstm };

inline constexpr std::array<CellKind, 3> kAllCells = {CellKind::SimpleRnn, CellKind::Gru,
                                                      CellKind::Lstm};

std::string_view cell_kind_name(CellKind kind) noexcept;
/// Accepts "SimpleRnn"/"rnn", "Gru", "Lstm", case-insensitively.
std::optional<CellKind> parse_cell_kind(std::string_view name) noexcept;
/// Gate blocks per cell: 1, 3 (update, reset, candidate) or 4 (input,
/// forget, cell, output).
std::size_t gate_count(CellKind kind) noexcept;

struct ParamBlock {
  std::string_view name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Weights of one recurrent layer with a scalar input plus the single
/// neuron dense head, held in one flat buffer.
///
/// Layout, with G gate blocks of H rows each, gates in the documented order:
///   input_weights      G*H       (W_x, one column)
///   recurrent_weights  G*H x H   row-major (W_h)
///   bias               G*H
///   dense_weight       H
///   dense_bias         1
class ModelParams {
public:
  ModelParams() = default;
  /// All-zero parameters.
  ModelParams(CellKind kind, std::size_t hidden_size);

  /// Glorot-uniform input and dense weights, orthogonal recurrent blocks,
  /// zero biases except an LSTM forget bias of 1.
  static ModelParams initialized(CellKind kind, std::size_t hidden_size, std::uint64_t seed);

  CellKind cell_kind() const noexcept { return kind_; }
  std::size_t hidden_size() const noexcept { return hidden_; }
  std::size_t gates() const noexcept { return gate_count(kind_); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::array<ParamBlock, 5> blocks() const noexcept;

  Eigen::Map<Eigen::VectorXd> input_weights();
  Eigen::Map<const Eigen::VectorXd> input_weights() const;
  Eigen::Map<RowMatrix> recurrent_weights();
  Eigen::Map<const RowMatrix> recurrent_weights() const;
  Eigen::Map<Eigen::VectorXd> bias();
  Eigen::Map<const Eigen::VectorXd> bias() const;
  Eigen::Map<Eigen::VectorXd> dense_weight();
  Eigen::Map<const Eigen::VectorXd> dense_weight() const;
  double& dense_bias() { return data_.back(); }
  double dense_bias() const { return data_.back(); }

  bool same_shape(const ModelParams& other) const noexcept {
    return kind_ == other.kind_ && hidden_ == other.hidden_;
  }
  void set_zero();
  bool all_finite() const noexcept;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
  std::size_t offset_recurrent() const noexcept { return gates() * hidden_; }
  std::size_t offset_bias() const noexcept { return offset_recurrent() + gates() * hidden_ * hidden_; }
  std::size_t offset_dense() const noexcept { return offset_bias() + gates() * hidden_; }

  CellKind kind_ = CellKind::SimpleRnn;
  std::size_t hidden_ = 0;
  std::vector<double> data_;
};

struct CellState {
  Eigen::VectorXd hidden;
  /// LSTM only; empty for the other cells.
  Eigen::VectorXd cell_memory;

  static CellState zeros(const ModelParams& params);
  friend bool operator==(const CellState& a, const CellState& b) {
    return a.hidden == b.hidden && a.cell_memory == b.cell_memory;
  }
};

struct StepOutput {
  Eigen::VectorXd hidden;
  CellState next_state;
  bool skipped = false;
};

/// One recurrent step. A masked step is skipped: the state passes through
/// untouched and the output is flagged.
StepOutput cell_step(const ModelParams& params, double x, const CellState& state, bool masked);

struct ForwardResult {
  std::vector<double> predictions;
  /// 1 where the step ran; 0 where the input was masked and the
  /// prediction is the carried-forward head output.
  Mask eligible;
};

/// Zero initial state; one dense-head prediction per step.
ForwardResult forward(const ModelParams& params, std::span<const double> inputs,
                      std::span<const std::uint8_t> input_mask = {});

struct LossValue {
  double loss = 0.0;
  std::size_t count = 0;
};

/// Mean absolute error over steps whose target is present and whose input
/// step ran. Throws EmptyLoss if nothing contributes.
LossValue mae_loss(std::span<const double> predictions, std::span<const std::optional<double>> targets,
                   std::span<const std::uint8_t> eligible = {});

/// Non-owning view of one training sequence. Empty masks mean all-present.
struct SequenceView {
  std::span<const double> inputs;
  std::span<const std::uint8_t> input_mask;
  std::span<const double> targets;
  std::span<const std::uint8_t> target_mask;
};

/// Loss of a sequence without the gradient; count may be 0.
LossValue sequence_loss(const ModelParams& params, const SequenceView& seq);

/// Reusable scratch memory for backpropagation through time.
class BpttWorkspace {
public:
  void reserve(std::size_t steps, std::size_t gate_rows, std::size_t hidden);

private:
  friend LossValue accumulate_gradient(const ModelParams&, const SequenceView&, ModelParams&,
                                       BpttWorkspace&);
  std::vector<double> gates_;   // activated gate values per executed step
  std::vector<double> hidden_;  // h per executed step
  std::vector<double> cell_;    // c per executed step (LSTM)
  std::vector<double> aux_;     // r.h (GRU) or tanh(c) (LSTM) per executed step
  std::vector<double> x_;
  std::vector<double> dy_;
  std::vector<std::size_t> steps_;
};

/// Adds the gradient of this sequence's mean loss to `gradient` and returns
/// the loss. Returns count 0 and adds nothing if no step contributes.
LossValue accumulate_gradient(const ModelParams& params, const SequenceView& seq,
                              ModelParams& gradient, BpttWorkspace& workspace);

struct BackwardResult {
  LossValue loss;
  ModelParams gradient;
};

/// Exact gradient of the sequence's MAE through the unrolled network.
/// Throws EmptyLoss when no position contributes.
BackwardResult backward(const ModelParams& params, const SequenceView& seq);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ModelParams& params, double learning_rate = 1e-3);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const ModelParams& gradient, AdamState& state);

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<BlockCheck> blocks;
  bool passed = true;
};

/// Compares `analytic` with central finite differences of the sequence
/// loss. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckReport compare_gradients(const ModelParams& params, const SequenceView& seq,
                                      const ModelParams& analytic, double fd_step, double tolerance);

GradientCheckReport gradient_check(const ModelParams& params, const SequenceView& seq,
                                   double fd_step = 1e-5, double tolerance = 1e-4);

struct GradientSuiteReport {
  CellKind cell = CellKind::Lstm;
  int cases = 0;
  double max_relative_error = 0.0;
  bool passed = true;
};

/// Gradient checks on `seeds` random networks of `hidden_size` units over
/// random sequences of `length` steps with some masked inputs and missing
/// targets.
GradientSuiteReport gradient_check_suite(CellKind kind, int seeds = 20, std::size_t hidden_size = 4,
                                         std::size_t length = 12, double tolerance = 1e-4);

/// Text record: kind, hidden size and every block in layout order, each
/// value as a hex float so the round trip is exact.
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in);

}  // namespace aadt
