#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gwae/tensor.hpp"

namespace gwae {

// Shared CSR neighbor structure used by the graph aggregation primitives.
struct NeighborLists {
  std::vector<std::uint32_t> offsets;  // size = list_count + 1
  std::vector<std::uint32_t> indices;

  std::size_t count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

// Define-by-run reverse-mode tape over dense Tensors, with a forward-mode
// tangent pass for directional derivatives. Single-threaded; run independent
// tapes on disjoint data for parallelism.
class Tape {
public:
  using Id = std::int32_t;

  enum class Op : std::uint8_t {
    Leaf,
    Matmul,
    Add,
    AddRow,
    Scale,
    Mul,
    Tanh,
    Relu,
    Exp,
    Log,
    Clamp,
    Sum,
    Mean,
    MeanRows,
    GatherRows,
    ScatterAddRows,
    ConcatRows,
    NeighborMean,
    GlobalMeanExcl,
    MmdImq,
  };

  Tape() = default;

  // When enabled (default) every op output is checked for NaN/Inf and a
  // NumericError is thrown at the producing op instead of poisoning the run.
  void set_check_finite(bool on) { check_finite_ = on; }

  Id leaf(Tensor value);

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id add_row(Id a, Id row);  // broadcast a 1xc row over all rows of a
  Id sub(Id a, Id b) { return add(a, scale(b, -1.0)); }
  Id scale(Id a, double s);
  Id mul(Id a, Id b);
  Id tanh(Id a);
  Id relu(Id a);
  Id exp(Id a);
  Id log(Id a);
  Id clamp(Id a, double lo, double hi);
  Id sum(Id a);
  Id mean(Id a);
  Id mean_rows(Id a);  // column means -> 1xc
  Id gather_rows(Id a, std::shared_ptr<const std::vector<std::uint32_t>> rows);
  Id scatter_add_rows(Id a, std::shared_ptr<const std::vector<std::uint32_t>> rows,
                      std::size_t out_rows);
  Id concat_rows(const std::vector<Id>& parts);
  // Row i of the output is the mean of rows lists[i] of the input (zero when
  // the list is empty). Input row count may differ from list count.
  Id neighbor_mean(Id a, std::shared_ptr<const NeighborLists> lists);
  // Row i = mean over all rows NOT in lists[i] and not i itself; zero when that
  // complement is empty. lists must have one list per input row.
  Id global_mean_excl(Id a, std::shared_ptr<const NeighborLists> lists);
  // Unbiased MMD^2 U-statistic between the rows of a and b (equal counts >= 2)
  // under the inverse multiquadratic kernel k(x,y) = c/(c + |x-y|^2).
  Id mmd_imq(Id a, Id b, double c);

  const Tensor& value(Id id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar output; gradients retrievable for any node.
  void backward(Id output);
  const Tensor& grad(Id id) const;

  // Forward tangent sweep: seed one leaf with a direction tensor (same shape)
  // and return the tangents of the requested outputs.
  std::vector<Tensor> jvp(const std::vector<Id>& outputs, Id seeded_leaf,
                          const Tensor& direction);

private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<Id> in;
    Tensor value;
    Tensor grad;
    Tensor tangent;
    bool grad_live = false;
    bool tangent_live = false;
    double s0 = 0.0, s1 = 0.0;
    std::shared_ptr<const NeighborLists> lists;
    std::shared_ptr<const std::vector<std::uint32_t>> rows;
    std::size_t aux = 0;
  };

  Id push(Node n);
  void ensure_finite(const Tensor& t, const char* what) const;
  Tensor& grad_buf(Id id);
  Tensor& tangent_buf(Id id);
  const Tensor& zero_like(const Tensor& t);

  void vjp_node(std::size_t i);
  Tensor jvp_node(std::size_t i);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

// Directional derivative of a tape-built function at a point: builds the
// function once and runs a tangent sweep. f receives the tape and the input
// leaf id and returns the output id.
Tensor jvp(const std::function<Tape::Id(Tape&, Tape::Id)>& f, const Tensor& point,
           const Tensor& direction);

// Adam optimizer state for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;
};

void adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace gwae
