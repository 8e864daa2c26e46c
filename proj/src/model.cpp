#include "gwae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwae/errors.hpp"
#include "gwae/util.hpp"

namespace gwae {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

Tensor glorot(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (auto& x : t.data) x = rng.uniform(-a, a);
  return t;
}

GraphConvLayer init_conv(std::size_t in, std::size_t out, bool tanh_act, RngStream rng) {
  GraphConvLayer l;
  l.w = glorot(in, out, rng);
  l.q_local = glorot(in, out, rng);
  l.q_global = glorot(in, out, rng);
  l.tanh_activation = tanh_act;
  return l;
}

}  // namespace

const GeoGraph& GwaeCheckpoint::template_graph() const {
  if (!template_cache_) {
    const std::size_t n = grid.cell_count();
    auto g = std::make_shared<GeoGraph>(build_grid_graph(
        grid.dims, std::vector<bool>(n, true), std::vector<double>(n * 2, 0.0), 2));
    template_adj_ = g->adjacency_lists();
    template_cache_ = std::move(g);
  }
  return *template_cache_;
}

std::shared_ptr<const NeighborLists> GwaeCheckpoint::template_adjacency() const {
  template_graph();
  return template_adj_;
}

std::vector<Tensor*> GwaeCheckpoint::weight_list() {
  return {&enc1.w,      &enc1.q_local, &enc1.q_global, &enc2.w,      &enc2.q_local,
          &enc2.q_global, &head_mu_w,  &head_mu_b,     &head_ls_w,   &head_ls_b,
          &lift_w,      &lift_b,       &node_embed,    &dec1.w,      &dec1.q_local,
          &dec1.q_global, &out_mu_w,   &out_mu_b,      &out_ls_w,    &out_ls_b};
}

std::vector<const Tensor*> GwaeCheckpoint::weight_list() const {
  auto mut = const_cast<GwaeCheckpoint*>(this)->weight_list();
  return std::vector<const Tensor*>(mut.begin(), mut.end());
}

GwaeCheckpoint init_checkpoint(const ModelConfig& arch, const GridSpec& grid,
                               const NormStats& stats, std::uint64_t seed) {
  if (arch.latent_dim < 1 || arch.hidden1 < 1 || arch.hidden2 < 1)
    throw ConfigError("model: layer sizes must be positive");
  if (arch.k != 1 && arch.k != 2) throw ConfigError("model: k must be 1 or 2");
  if (arch.k == 2 && grid.cell_count() > kMaxNodesForK2)
    throw ConfigError("model: k=2 encoder requires <= 64 cells");

  GwaeCheckpoint c;
  c.arch = arch;
  c.grid = grid;
  c.stats = stats;
  RngStream root = RngStream(seed).derive("init");
  const std::size_t m = arch.latent_dim;
  const std::size_t h1 = arch.hidden1;
  const std::size_t h2 = arch.hidden2;
  const std::size_t v = grid.cell_count();

  c.enc1 = init_conv(2, h1, true, root.derive("enc1"));
  c.enc2 = init_conv(h1, h2, true, root.derive("enc2"));
  RngStream heads = root.derive("heads");
  c.head_mu_w = glorot(h2, m, heads);
  c.head_mu_b = Tensor(1, m);
  c.head_ls_w = glorot(h2, m, heads);
  c.head_ls_b = Tensor::full(1, m, -1.0);  // start with modest posterior spread

  RngStream dec = root.derive("dec");
  c.lift_w = glorot(m, h2, dec);
  c.lift_b = Tensor(1, h2);
  c.node_embed = glorot(v, h2, dec);
  c.dec1 = init_conv(h2, h1, true, root.derive("dec1"));
  RngStream outs = root.derive("outs");
  c.out_mu_w = glorot(h1, 2, outs);
  c.out_mu_b = Tensor(1, 2);
  c.out_ls_w = glorot(h1, 2, outs);
  c.out_ls_b = Tensor(1, 2);
  return c;
}

TapeWeights put_weights(Tape& tape, const GwaeCheckpoint& ckpt) {
  TapeWeights w;
  for (const Tensor* t : ckpt.weight_list()) w.ids.push_back(tape.leaf(*t));
  return w;
}

namespace {

// indices into TapeWeights::ids, matching GwaeCheckpoint::weight_list order
enum WIdx {
  E1W, E1L, E1G, E2W, E2L, E2G, HMW, HMB, HLW, HLB,
  LFW, LFB, EMB, D1W, D1L, D1G, OMW, OMB, OLW, OLB,
};

Tape::Id conv_apply(Tape& tape, Tape::Id h, Tape::Id w, Tape::Id ql, Tape::Id qg,
                    const std::shared_ptr<const NeighborLists>& local,
                    const std::shared_ptr<const NeighborLists>& global, bool tanh_act) {
  Tape::Id self = tape.matmul(h, w);
  Tape::Id loc = tape.matmul(tape.neighbor_mean(h, local), ql);
  Tape::Id glob = global ? tape.matmul(tape.neighbor_mean(h, global), qg)
                         : tape.matmul(tape.global_mean_excl(h, local), qg);
  Tape::Id out = tape.add(tape.add(self, loc), glob);
  return tanh_act ? tape.tanh(out) : out;
}

}  // namespace

std::pair<Tape::Id, Tape::Id> encode_on_tape(Tape& tape, const TapeWeights& w,
                                             const GwaeCheckpoint& ckpt, const GeoGraph& graph,
                                             Tape::Id features) {
  if (graph.node_count != ckpt.node_count())
    throw ConfigError("encode: graph node count does not match checkpoint");
  if (graph.feature_count != 2) throw ConfigError("encode: expected 2 feature channels");

  Tape::Id h = features;
  std::shared_ptr<const NeighborLists> local, global;
  if (ckpt.arch.k == 1) {
    local = graph.adjacency_lists();
    global = nullptr;
  } else {
    const KSetSpace space = build_kset_space(graph, ckpt.arch.k);
    h = tape.neighbor_mean(features, space.members);  // set features = member mean
    local = space.local;
    global = space.global;
  }
  Tape::Id h1 = conv_apply(tape, h, w.ids[E1W], w.ids[E1L], w.ids[E1G], local, global, true);
  Tape::Id h2 = conv_apply(tape, h1, w.ids[E2W], w.ids[E2L], w.ids[E2G], local, global, true);
  Tape::Id pooled = tape.mean_rows(h2);
  Tape::Id mu = tape.add(tape.matmul(pooled, w.ids[HMW]), w.ids[HMB]);
  Tape::Id ls = tape.clamp(tape.add(tape.matmul(pooled, w.ids[HLW]), w.ids[HLB]),
                           ckpt.arch.logsig_min, ckpt.arch.logsig_max);
  return {mu, ls};
}

std::pair<Tape::Id, Tape::Id> decode_on_tape(Tape& tape, const TapeWeights& w,
                                             const GwaeCheckpoint& ckpt, Tape::Id z) {
  if (tape.value(z).nrows != 1 ||
      tape.value(z).ncols != static_cast<std::size_t>(ckpt.arch.latent_dim))
    throw ConfigError("decode: z must be 1 x latent_dim");
  const auto local = ckpt.template_adjacency();
  Tape::Id lift = tape.add(tape.matmul(z, w.ids[LFW]), w.ids[LFB]);
  Tape::Id seed = tape.add_row(w.ids[EMB], lift);
  Tape::Id h = conv_apply(tape, seed, w.ids[D1W], w.ids[D1L], w.ids[D1G], local, nullptr, true);
  Tape::Id mu = tape.add_row(tape.matmul(h, w.ids[OMW]), w.ids[OMB]);
  Tape::Id ls = tape.clamp(tape.add_row(tape.matmul(h, w.ids[OLW]), w.ids[OLB]),
                           ckpt.arch.logsig_min, ckpt.arch.logsig_max);
  return {mu, ls};
}

Tensor graph_conv_forward(const GraphConvLayer& layer, const GeoGraph& graph, const Tensor& h) {
  Tape tape;
  Tape::Id hid = tape.leaf(h);
  Tape::Id out = conv_apply(tape, hid, tape.leaf(layer.w), tape.leaf(layer.q_local),
                            tape.leaf(layer.q_global), graph.adjacency_lists(), nullptr,
                            layer.tanh_activation);
  return tape.value(out);
}

Tensor graph_conv_forward(const GraphConvLayer& layer, const KSetSpace& space, const Tensor& h) {
  Tape tape;
  Tape::Id hid = tape.leaf(h);
  Tape::Id out = conv_apply(tape, hid, tape.leaf(layer.w), tape.leaf(layer.q_local),
                            tape.leaf(layer.q_global), space.local, space.global,
                            layer.tanh_activation);
  return tape.value(out);
}

LatentCode encode(const GwaeCheckpoint& ckpt, const GeoGraph& graph) {
  Tape tape;
  TapeWeights w = put_weights(tape, ckpt);
  auto [mu, ls] = encode_on_tape(tape, w, ckpt, graph, tape.leaf(graph.features_tensor()));
  LatentCode code;
  code.mu = tape.value(mu).data;
  code.log_sigma = tape.value(ls).data;
  return code;
}

std::vector<double> reparameterize(const LatentCode& code, RngStream& rng) {
  std::vector<double> z(code.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = code.mu[i] + std::exp(code.log_sigma[i]) * rng.normal();
  return z;
}

DecoderOutput decode(const GwaeCheckpoint& ckpt, const std::vector<double>& z) {
  if (z.size() != static_cast<std::size_t>(ckpt.arch.latent_dim))
    throw ConfigError("decode: wrong latent dimension");
  Tape tape;
  TapeWeights w = put_weights(tape, ckpt);
  auto [mu, ls] = decode_on_tape(tape, w, ckpt, tape.leaf(Tensor(1, z.size(), z)));
  return {tape.value(mu), tape.value(ls)};
}

Realisation decode_realisation(const GwaeCheckpoint& ckpt, const std::vector<double>& z) {
  const DecoderOutput out = decode(ckpt, z);
  const GeoGraph& tmpl = ckpt.template_graph();
  GeoGraph g = tmpl;
  g.node_features = out.mu.data;
  Realisation base;
  base.grid = ckpt.grid;
  Realisation r = graph_to_realisation(g, ckpt.stats, base);
  for (auto& phi : r.porosity) phi = std::clamp(phi, 1e-3, 0.6);
  for (auto& k : r.permeability) k = std::clamp(k, kPermMinMd, kPermMaxMd);
  return r;
}

double mmd(const Tensor& z_batch, const Tensor& prior_batch, double c) {
  Tape tape;
  Tape::Id a = tape.leaf(z_batch);
  Tape::Id b = tape.leaf(prior_batch);
  return tape.value(tape.mmd_imq(a, b, c)).data[0];
}

namespace {

struct BatchLoss {
  Tape tape;
  TapeWeights weights;
  Tape::Id total = 0, recon = 0, reg = 0;
};

// Builds the full objective for one mini-batch on a fresh tape. Consumes, in
// order, one epsilon row per sample then one prior row per sample from rng.
void build_batch_loss(BatchLoss& bl, const std::vector<const GeoGraph*>& batch,
                      const GwaeCheckpoint& ckpt, double lambda, RngStream& rng) {
  if (batch.size() < 2) throw ConfigError("wae_loss: batch must have at least 2 samples");
  const std::size_t m = ckpt.arch.latent_dim;
  Tape& tape = bl.tape;
  bl.weights = put_weights(tape, ckpt);

  std::vector<Tape::Id> nlls, zs;
  for (const GeoGraph* g : batch) {
    Tape::Id x = tape.leaf(g->features_tensor());
    auto [mu, ls] = encode_on_tape(tape, bl.weights, ckpt, *g, x);
    Tensor eps(1, m);
    for (auto& e : eps.data) e = rng.normal();
    Tape::Id z = tape.add(mu, tape.mul(tape.exp(ls), tape.leaf(eps)));
    zs.push_back(z);

    auto [dmu, dls] = decode_on_tape(tape, bl.weights, ckpt, z);
    Tape::Id diff = tape.sub(x, dmu);
    Tape::Id t = tape.mul(diff, tape.exp(tape.scale(dls, -1.0)));
    Tape::Id elems = tape.add(tape.add(dls, tape.scale(tape.mul(t, t), 0.5)),
                              tape.leaf(Tensor::full(tape.value(dls).nrows, 2, kHalfLog2Pi)));
    nlls.push_back(tape.mean(elems));
  }
  bl.recon = tape.mean(tape.concat_rows(nlls));
  Tensor prior(batch.size(), m);
  for (auto& p : prior.data) p = rng.normal();
  bl.reg = tape.mmd_imq(tape.concat_rows(zs), tape.leaf(prior), 2.0 * static_cast<double>(m));
  bl.total = tape.add(bl.recon, tape.scale(bl.reg, lambda));
}

}  // namespace

WaeLossValue wae_loss(const std::vector<const GeoGraph*>& batch, const GwaeCheckpoint& ckpt,
                      double lambda, RngStream& rng) {
  BatchLoss bl;
  build_batch_loss(bl, batch, ckpt, lambda, rng);
  return {bl.tape.value(bl.total).data[0], bl.tape.value(bl.recon).data[0],
          bl.tape.value(bl.reg).data[0]};
}

WaeLossValue wae_loss_with_grads(const std::vector<const GeoGraph*>& batch,
                                 const GwaeCheckpoint& ckpt, double lambda, RngStream& rng,
                                 std::vector<Tensor>& grads) {
  BatchLoss bl;
  build_batch_loss(bl, batch, ckpt, lambda, rng);
  bl.tape.backward(bl.total);
  grads.clear();
  for (Tape::Id id : bl.weights.ids) grads.push_back(bl.tape.grad(id));
  return {bl.tape.value(bl.total).data[0], bl.tape.value(bl.recon).data[0],
          bl.tape.value(bl.reg).data[0]};
}

GwaeCheckpoint train(const std::vector<GeoGraph>& graphs, const ModelConfig& arch,
                     const GridSpec& grid, const NormStats& stats, const TrainConfig& cfg,
                     std::uint64_t seed) {
  if (graphs.empty()) throw ConfigError("train: empty dataset");
  for (const auto& g : graphs)
    if (g.node_count != grid.cell_count())
      throw ConfigError("train: graph node count does not match grid");
  if (cfg.batch_size < 2) throw ConfigError("train: batch size must be >= 2");

  GwaeCheckpoint ckpt = init_checkpoint(arch, grid, stats, seed);
  std::vector<AdamState> adam(ckpt.weight_list().size());
  RngStream shuffle_rng = RngStream(seed).derive("shuffle");
  RngStream noise_rng = RngStream(seed).derive("noise");

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double recon_sum = 0.0, reg_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      if (stop - start < 2) break;  // a trailing single sample cannot form a batch
      std::vector<const GeoGraph*> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&graphs[order[i]]);

      BatchLoss bl;
      try {
        build_batch_loss(bl, batch, ckpt, cfg.lambda_mmd, noise_rng);
        bl.tape.backward(bl.total);
      } catch (const NumericError& e) {
        throw NumericError("train: aborted at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      auto weights = ckpt.weight_list();
      for (std::size_t wi = 0; wi < weights.size(); ++wi)
        adam_step(*weights[wi], bl.tape.grad(bl.weights.ids[wi]), adam[wi], cfg.learning_rate);

      recon_sum += bl.tape.value(bl.recon).data[0];
      reg_sum += bl.tape.value(bl.reg).data[0];
      ++batches;
    }
    if (batches == 0) throw ConfigError("train: dataset too small for the batch size");
    ckpt.loss_history.emplace_back(recon_sum / batches, reg_sum / batches);
  }
  return ckpt;
}

Tensor encode_all(const GwaeCheckpoint& ckpt, const std::vector<GeoGraph>& graphs, int threads) {
  Tensor codes(graphs.size(), ckpt.arch.latent_dim);
  parallel_for(graphs.size(), threads, [&](std::size_t i) {
    const LatentCode c = encode(ckpt, graphs[i]);
    std::copy(c.mu.begin(), c.mu.end(), codes.data.begin() + i * codes.ncols);
  });
  return codes;
}

}  // namespace gwae
