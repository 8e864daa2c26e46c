#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gwae/geodata.hpp"
#include "gwae/graph.hpp"
#include "gwae/rng.hpp"
#include "gwae/tape.hpp"
#include "gwae/tensor.hpp"

namespace gwae {

// One hierarchical graph convolution: out = act(h*W + mean_local(h)*Q_L +
// mean_global(h)*Q_G), with empty neighborhoods contributing zero. Weight
// matrices are stored input-major (in x out).
struct GraphConvLayer {
  Tensor w;
  Tensor q_local;
  Tensor q_global;
  bool tanh_activation = true;
};

struct ModelConfig {
  int latent_dim = 8;
  int hidden1 = 32;
  int hidden2 = 64;
  int k = 1;  // k-set order of the encoder convolutions (k=2 only at test scale)
  double logsig_min = -6.0;
  double logsig_max = 2.0;
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double lambda_mmd = 10.0;
};

struct LatentCode {
  std::vector<double> mu;
  std::vector<double> log_sigma;

  std::size_t dim() const { return mu.size(); }
};

struct DecoderOutput {
  Tensor mu;         // node_count x 2
  Tensor log_sigma;  // node_count x 2
};

// Everything needed to encode/decode after training: architecture, the
// template grid the decoder targets, dataset normalization, weights and the
// per-epoch loss history.
struct GwaeCheckpoint {
  std::uint32_t version = 1;
  ModelConfig arch;
  GridSpec grid;
  NormStats stats;

  GraphConvLayer enc1, enc2;
  Tensor head_mu_w, head_mu_b;
  Tensor head_ls_w, head_ls_b;

  Tensor lift_w, lift_b;
  Tensor node_embed;  // node_count x hidden2, learned per-node decoder seed
  GraphConvLayer dec1;
  Tensor out_mu_w, out_mu_b;
  Tensor out_ls_w, out_ls_b;

  std::vector<std::pair<double, double>> loss_history;  // (recon, reg) per epoch
  std::string train_config_echo;

  std::size_t node_count() const { return grid.cell_count(); }
  // All-active template topology and its CSR adjacency, lazily built. Call
  // warm_caches() before decoding from multiple threads.
  const GeoGraph& template_graph() const;
  std::shared_ptr<const NeighborLists> template_adjacency() const;
  void warm_caches() const { template_graph(); }

  // Weight blobs in serialization order, shared by file IO and the trainer.
  std::vector<Tensor*> weight_list();
  std::vector<const Tensor*> weight_list() const;

private:
  mutable std::shared_ptr<GeoGraph> template_cache_;
  mutable std::shared_ptr<const NeighborLists> template_adj_;
};

GwaeCheckpoint init_checkpoint(const ModelConfig& arch, const GridSpec& grid,
                               const NormStats& stats, std::uint64_t seed);

// Leaf ids of all checkpoint weights on a tape, in weight_list order.
struct TapeWeights {
  std::vector<Tape::Id> ids;
};
TapeWeights put_weights(Tape& tape, const GwaeCheckpoint& ckpt);

// mu/log-sigma tape outputs of the encoder for an input feature leaf.
std::pair<Tape::Id, Tape::Id> encode_on_tape(Tape& tape, const TapeWeights& w,
                                             const GwaeCheckpoint& ckpt, const GeoGraph& graph,
                                             Tape::Id features);
// mu/log-sigma per-node tape outputs of the decoder for a latent row leaf.
std::pair<Tape::Id, Tape::Id> decode_on_tape(Tape& tape, const TapeWeights& w,
                                             const GwaeCheckpoint& ckpt, Tape::Id z);

// Standalone layer application (value only). The k=1 overload aggregates over
// the grid adjacency with the O(V+E) global-complement trick; the k-set
// overload uses the space's explicit lists.
Tensor graph_conv_forward(const GraphConvLayer& layer, const GeoGraph& graph, const Tensor& h);
Tensor graph_conv_forward(const GraphConvLayer& layer, const KSetSpace& space, const Tensor& h);

LatentCode encode(const GwaeCheckpoint& ckpt, const GeoGraph& graph);
std::vector<double> reparameterize(const LatentCode& code, RngStream& rng);
DecoderOutput decode(const GwaeCheckpoint& ckpt, const std::vector<double>& z);

// Decode straight to grid properties (denormalized, clamped to the physical
// property ranges so the flow simulator accepts any latent point).
Realisation decode_realisation(const GwaeCheckpoint& ckpt, const std::vector<double>& z);

// Unbiased MMD^2 U-statistic with the inverse multiquadratic kernel,
// c = 2 * latent_dim. Rows are samples.
double mmd(const Tensor& z_batch, const Tensor& prior_batch, double c);

struct WaeLossValue {
  double total = 0.0;
  double recon = 0.0;
  double reg = 0.0;
};

// Gaussian reconstruction NLL (per node and channel) + lambda * MMD^2 between
// the reparameterized batch codes and prior draws.
WaeLossValue wae_loss(const std::vector<const GeoGraph*>& batch, const GwaeCheckpoint& ckpt,
                      double lambda, RngStream& rng);

// Same loss plus d(total)/d(weight) for every checkpoint weight, in
// weight_list order (the training step and gradient checks share this path).
WaeLossValue wae_loss_with_grads(const std::vector<const GeoGraph*>& batch,
                                 const GwaeCheckpoint& ckpt, double lambda, RngStream& rng,
                                 std::vector<Tensor>& grads);

// Mini-batch Adam training; deterministic for a fixed seed. Graphs must all
// match the checkpoint grid. Records (recon, reg) per epoch.
GwaeCheckpoint train(const std::vector<GeoGraph>& graphs, const ModelConfig& arch,
                     const GridSpec& grid, const NormStats& stats, const TrainConfig& cfg,
                     std::uint64_t seed);

// Posterior means of many graphs, rows in input order.
Tensor encode_all(const GwaeCheckpoint& ckpt, const std::vector<GeoGraph>& graphs,
                  int threads = 1);

}  // namespace gwae
