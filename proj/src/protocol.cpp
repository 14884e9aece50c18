#include "vfl/protocol.hpp"

#include "vfl/metrics.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace vfl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<LayerSpec> extractor_specs(Index in_dim, const ProtocolConfig& cfg) {
  std::vector<LayerSpec> specs;
  Index prev = in_dim;
  for (Index h : cfg.extractor_hidden) {
    specs.push_back({prev, h, Activation::ReLU});
    prev = h;
  }
  // The representation layer is linear so reps are unclipped scores.
  specs.push_back({prev, cfg.rep_dim, Activation::Identity});
  return specs;
}

std::vector<LayerSpec> classifier_specs(Index in_dim, int num_classes,
                                        const ProtocolConfig& cfg) {
  std::vector<LayerSpec> specs;
  Index prev = in_dim;
  for (Index h : cfg.server_hidden) {
    specs.push_back({prev, h, Activation::ReLU});
    prev = h;
  }
  specs.push_back({prev, static_cast<Index>(num_classes), Activation::Identity});
  return specs;
}

Mat concat_reps(const std::vector<Mat>& reps) {
  if (reps.empty()) throw std::invalid_argument("concat_reps: no blocks");
  const Index rows = reps[0].rows();
  Index cols = 0;
  for (const Mat& r : reps) {
    if (r.rows() != rows) throw std::invalid_argument("concat_reps: row count mismatch");
    cols += r.cols();
  }
  Mat out(rows, cols);
  Index at = 0;
  for (const Mat& r : reps) {  // ascending client id
    out.middleCols(at, r.cols()) = r;
    at += r.cols();
  }
  return out;
}

std::string client_tag(std::uint64_t, int id, const char* what) {
  return "client/" + std::to_string(id) + "/" + what;
}

// Phases 1..4 shared by the one-shot and few-shot drivers: upload overlap
// reps, receive partial gradient slices plus C, cluster them into temporary
// labels, run local SSL. cache_unaligned additionally snapshots unaligned
// reps in the same extractor state as the overlap upload, for the lean
// few-shot flow.
void oneshot_core(Parties& p, const VflSplit& split, const ProtocolConfig& cfg,
                  CommLedger& ledger, bool cache_unaligned,
                  std::map<std::string, double>& diag, std::map<std::string, double>& timings) {
  auto t0 = Clock::now();
  p.server.overlap_reps.clear();
  for (ClientState& c : p.clients) {
    p.server.overlap_reps.push_back(client_extract(c, RepScope::Overlap, ledger));
    if (cache_unaligned) c.cached_unaligned_reps = extract_reps(c, RepScope::Unaligned);
  }
  timings["extract_overlap"] = seconds_since(t0);

  t0 = Clock::now();
  const PartialGrads grads = server_partial_grads(p.server, cfg, ledger);
  timings["partial_grads"] = seconds_since(t0);

  t0 = Clock::now();
  for (std::size_t k = 0; k < p.clients.size(); ++k) {
    ClientState& c = p.clients[k];
    attach_local_head(c, grads.num_classes, cfg);
    c.temp_labels = gradients_to_temp_labels(
        grads.per_client[k], grads.num_classes, cfg.temp_labels,
        derive_seed(cfg.seed, client_tag(cfg.seed, c.id, "kmeans")));
    diag["purity_client_" + std::to_string(c.id)] =
        cluster_purity(c.temp_labels, split.overlap_labels);
  }
  timings["temp_labels"] = seconds_since(t0);

  t0 = Clock::now();
  // Local SSL is independent per client; run the clients concurrently.
  // Determinism holds because each client owns its state and rng stream.
  std::vector<std::thread> workers;
  std::vector<SslTrainStats> stats(p.clients.size());
  for (std::size_t k = 0; k < p.clients.size(); ++k) {
    workers.emplace_back([&, k]() {
      ClientState& c = p.clients[k];
      Rng rng(derive_seed(cfg.seed, client_tag(cfg.seed, c.id, "ssl/1")));
      stats[k] = local_ssl_train(c.model, c.x_overlap, c.temp_labels, c.x_unaligned, cfg.ssl,
                                 c.augment, rng);
    });
  }
  for (std::thread& w : workers) w.join();
  for (std::size_t k = 0; k < p.clients.size(); ++k)
    diag["ssl1_confident_frac_client_" + std::to_string(p.clients[k].id)] =
        stats[k].confident_fraction;
  timings["local_ssl"] = seconds_since(t0);
}

RunReport assemble_report(const std::string& method, const ProtocolConfig& cfg,
                          const CommLedger& ledger, const Parties& parties,
                          const std::map<std::string, double>& metrics,
                          const std::map<std::string, double>& timings) {
  RunReport r;
  r.method = method;
  r.seed = cfg.seed;
  r.run_id = method + "-seed" + std::to_string(cfg.seed);
  r.metrics = metrics;
  const CommSummary s = comm_summary(ledger);
  for (const ClientState& c : parties.clients) {
    const auto it = s.per_client_messages.find(c.id);
    r.comm_messages_per_client.push_back(it == s.per_client_messages.end() ? 0 : it->second);
  }
  r.comm_total_messages = s.total_messages;
  r.comm_total_scalars = s.total_scalars;
  r.comm_total_bytes = s.total_bytes;
  r.comm_mb = s.total_mb;
  r.comm_scalars_per_role = s.scalars_per_role;
  r.timings_sec = timings;
  return r;
}

}  // namespace

Parties make_parties(const VflSplit& split, const ProtocolConfig& cfg) {
  if (split.num_clients() < 2)
    throw std::invalid_argument("make_parties: need at least two clients");
  if (cfg.rep_dim < 1) throw std::invalid_argument("make_parties: rep_dim must be >= 1");

  Parties p;
  for (std::size_t k = 0; k < split.num_clients(); ++k) {
    ClientState c;
    c.id = static_cast<int>(k);
    // Standardization uses only this client's rows; clients cannot pool.
    Mat local(split.overlap_features[k].rows() + split.unaligned_features[k].rows(),
              split.overlap_features[k].cols());
    local << split.overlap_features[k], split.unaligned_features[k];
    c.stats = feature_stats(local);
    c.x_overlap = apply_stats(split.overlap_features[k], c.stats);
    c.x_unaligned = apply_stats(split.unaligned_features[k], c.stats);
    c.augment = cfg.augment;
    Mat both(c.x_overlap.rows() + c.x_unaligned.rows(), c.x_overlap.cols());
    both << c.x_overlap, c.x_unaligned;
    c.augment.feature_means = both.colwise().mean().transpose();
    c.model.params = mlp_init(extractor_specs(c.x_overlap.cols(), cfg),
                              derive_seed(cfg.seed, client_tag(cfg.seed, c.id, "extractor")));
    c.model.extractor_layers = c.model.params.layers.size();
    p.clients.push_back(std::move(c));
  }
  p.server.labels = split.overlap_labels;
  p.server.num_classes = split.num_classes;
  p.server.classifier =
      mlp_init(classifier_specs(static_cast<Index>(split.num_clients()) * cfg.rep_dim,
                                split.num_classes, cfg),
               derive_seed(cfg.seed, "server/classifier"));
  return p;
}

void attach_local_head(ClientState& client, int num_classes, const ProtocolConfig& cfg) {
  if (client.model.params.empty())
    throw std::invalid_argument("attach_local_head: extractor missing");
  if (client.model.params.layers.size() != client.model.extractor_layers) return;  // already attached
  const MlpParams head =
      mlp_init({{cfg.rep_dim, static_cast<Index>(num_classes), Activation::Identity}},
               derive_seed(cfg.seed, client_tag(cfg.seed, client.id, "head")));
  client.model.params.layers.push_back(head.layers[0]);
}

Mat extract_reps(const ClientState& client, RepScope scope) {
  if (client.model.params.empty())
    throw std::invalid_argument("extract_reps: uninitialized extractor");
  const Mat& x = scope == RepScope::Overlap ? client.x_overlap : client.x_unaligned;
  if (x.rows() == 0) return Mat(0, client.model.extractor().out_dim());
  return forward_output(client.model.extractor(), x);
}

Mat client_extract(const ClientState& client, RepScope scope, CommLedger& ledger) {
  Mat reps = extract_reps(client, scope);
  ledger.record_upload(client.id,
                       scope == RepScope::Overlap ? PayloadRole::RepsOverlap
                                                  : PayloadRole::RepsUnaligned,
                       static_cast<std::size_t>(reps.rows()) *
                           static_cast<std::size_t>(reps.cols()));
  return reps;
}

PartialGrads server_partial_grads(ServerState& server, const ProtocolConfig& cfg,
                                  CommLedger& ledger) {
  if (server.overlap_reps.empty())
    throw std::invalid_argument("server_partial_grads: no uploaded reps");
  const Mat concat = concat_reps(server.overlap_reps);
  if (concat.rows() != server.labels.size())
    throw std::invalid_argument("server_partial_grads: reps/labels row mismatch");

  if (cfg.server_grad_warmup_epochs > 0) {
    Rng rng(derive_seed(cfg.seed, "server/warmup"));
    train_classifier(server.classifier, concat, server.labels, cfg.server_grad_warmup_epochs,
                     cfg.server_batch, cfg.server_lr, rng);
  }

  const ForwardTrace trace = forward(server.classifier, concat);
  const XentResult xent = softmax_cross_entropy(trace.output(), server.labels);
  const Gradients g = backward(server.classifier, trace, xent.dlogits);

  PartialGrads out;
  out.num_classes = server.num_classes;
  Index at = 0;
  for (std::size_t k = 0; k < server.overlap_reps.size(); ++k) {
    const Index width = server.overlap_reps[k].cols();
    out.per_client.push_back(g.input.middleCols(at, width));
    at += width;
    // The class count C rides along with the gradient slice: one download,
    // one extra scalar.
    ledger.record_download(static_cast<int>(k), PayloadRole::PartialGrads,
                           static_cast<std::size_t>(g.input.rows()) *
                                   static_cast<std::size_t>(width) +
                               1);
  }
  return out;
}

Mat sdpa_estimate(const Mat& h_u_a, const Mat& h_o_a, const Mat& h_o_b) {
  if (h_u_a.cols() != h_o_a.cols())
    throw std::invalid_argument("sdpa_estimate: query/key dimension mismatch");
  if (h_o_a.rows() != h_o_b.rows())
    throw std::invalid_argument("sdpa_estimate: key/value row mismatch");
  if (h_o_a.rows() == 0) throw std::invalid_argument("sdpa_estimate: empty keys");
  const double scale = 1.0 / std::sqrt(static_cast<double>(h_u_a.cols()));
  return softmax_rows(h_u_a * h_o_a.transpose() * scale) * h_o_b;
}

void train_classifier(MlpParams& model, const Mat& inputs, const IVec& labels, int epochs,
                      int batch, double lr, Rng& rng) {
  if (inputs.rows() != labels.size())
    throw std::invalid_argument("train_classifier: inputs/labels mismatch");
  if (batch < 1) throw std::invalid_argument("train_classifier: batch must be >= 1");
  const Index n = inputs.rows();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (Index start = 0; start < n; start += batch) {
      const Index b = std::min<Index>(batch, n - start);
      Mat xb(b, inputs.cols());
      IVec yb(b);
      for (Index i = 0; i < b; ++i) {
        xb.row(i) = inputs.row(order[static_cast<std::size_t>(start + i)]);
        yb[i] = labels[order[static_cast<std::size_t>(start + i)]];
      }
      const ForwardTrace t = forward(model, xb);
      const XentResult xr = softmax_cross_entropy(t.output(), yb);
      const Gradients g = backward(model, t, xr.dlogits);
      model = sgd_step(model, g.params, lr);
    }
  }
}

void train_aux_classifiers(ServerState& server, const ProtocolConfig& cfg) {
  if (server.overlap_reps.size() != 2)
    throw std::invalid_argument("train_aux_classifiers: two-client protocol only");
  server.aux.clear();
  for (std::size_t k = 0; k < server.overlap_reps.size(); ++k) {
    MlpParams aux = mlp_init(
        classifier_specs(server.overlap_reps[k].cols(), server.num_classes, cfg),
        derive_seed(cfg.seed, "server/aux/" + std::to_string(k)));
    Rng rng(derive_seed(cfg.seed, "server/aux_train/" + std::to_string(k)));
    train_classifier(aux, server.overlap_reps[k], server.labels, cfg.server_epochs,
                     cfg.server_batch, cfg.server_lr, rng);
    server.aux.push_back(std::move(aux));
  }
  const Mat concat = concat_reps(server.overlap_reps);
  if (cfg.reuse_joint_classifier) {
    server.joint = server.classifier;
  } else {
    server.joint = mlp_init(classifier_specs(concat.cols(), server.num_classes, cfg),
                            derive_seed(cfg.seed, "server/joint"));
  }
  Rng rng(derive_seed(cfg.seed, "server/joint_train"));
  train_classifier(server.joint, concat, server.labels, cfg.server_epochs, cfg.server_batch,
                   cfg.server_lr, rng);
}

double inclusion_probability(int y_local, double p_local, int y_joint, double p_joint,
                             double t) {
  if (t <= 0.0 || t >= 1.0)
    throw std::invalid_argument("inclusion_probability: t must be in (0,1)");
  // Strict inequalities: confidence exactly at t does not qualify.
  if (y_local == y_joint && p_local > t && p_joint > t) return p_joint;
  return 0.0;
}

Vec infer_prob(const ServerState& server, int client_id, double threshold, CommLedger& ledger) {
  if (server.aux.size() != 2 || server.joint.empty())
    throw std::invalid_argument("infer_prob: aux classifiers not trained");
  if (client_id < 0 || client_id > 1)
    throw std::invalid_argument("infer_prob: two-client protocol only");
  if (server.unaligned_reps.size() != 2 ||
      server.unaligned_reps[static_cast<std::size_t>(client_id)].rows() == 0)
    throw std::invalid_argument("infer_prob: unaligned reps not uploaded");

  const std::size_t k = static_cast<std::size_t>(client_id);
  const std::size_t other = 1 - k;
  const Mat& h_u = server.unaligned_reps[k];

  const Mat p_local = predict_proba(server.aux[k], h_u);
  const Mat h_est = sdpa_estimate(h_u, server.overlap_reps[k], server.overlap_reps[other]);
  // Concatenation order is ascending client id regardless of which client asked.
  const Mat joint_in = (k == 0) ? concat_reps({h_u, h_est}) : concat_reps({h_est, h_u});
  const Mat p_joint = predict_proba(server.joint, joint_in);

  Vec out(h_u.rows());
  const IVec y_local = argmax_rows(p_local);
  const IVec y_joint = argmax_rows(p_joint);
  for (Index i = 0; i < out.size(); ++i)
    out[i] = inclusion_probability(y_local[i], p_local.row(i).maxCoeff(), y_joint[i],
                                   p_joint.row(i).maxCoeff(), threshold);
  ledger.record_download(client_id, PayloadRole::InclusionProbs,
                         static_cast<std::size_t>(out.size()));
  return out;
}

ExpansionStats client_expand_and_ssl(ClientState& client, const Vec& p_hat,
                                     const ProtocolConfig& cfg, Rng& rng) {
  if (p_hat.size() != client.x_unaligned.rows())
    throw std::invalid_argument("client_expand_and_ssl: p_hat size mismatch");
  if (client.model.params.layers.size() == client.model.extractor_layers)
    throw std::invalid_argument("client_expand_and_ssl: local head missing");

  std::vector<int> chosen;
  for (Index i = 0; i < p_hat.size(); ++i) {
    if (p_hat[i] < 0.0 || p_hat[i] > 1.0)
      throw std::invalid_argument("client_expand_and_ssl: p_hat outside [0,1]");
    if (p_hat[i] > 0.0 && rng.bernoulli(p_hat[i])) chosen.push_back(static_cast<int>(i));
  }

  ExpansionStats stats;
  stats.included = static_cast<int>(chosen.size());
  client.expanded_rows.resize(static_cast<Index>(chosen.size()));
  client.expanded_labels.resize(static_cast<Index>(chosen.size()));

  Mat x_labeled(client.x_overlap.rows() + static_cast<Index>(chosen.size()),
                client.x_overlap.cols());
  IVec y_labeled(x_labeled.rows());
  x_labeled.topRows(client.x_overlap.rows()) = client.x_overlap;
  y_labeled.head(client.temp_labels.size()) = client.temp_labels;
  if (!chosen.empty()) {
    Mat x_uc(static_cast<Index>(chosen.size()), client.x_unaligned.cols());
    for (std::size_t i = 0; i < chosen.size(); ++i) x_uc.row(static_cast<Index>(i)) = client.x_unaligned.row(chosen[i]);
    // Pseudo-labels come from the current local model on the raw samples.
    const IVec pseudo = argmax_rows(predict_proba(client.model.params, x_uc));
    x_labeled.bottomRows(x_uc.rows()) = x_uc;
    y_labeled.tail(pseudo.size()) = pseudo;
    client.expanded_labels = pseudo;
    for (std::size_t i = 0; i < chosen.size(); ++i)
      client.expanded_rows[static_cast<Index>(i)] = chosen[i];
  }

  Mat x_unlabeled(client.x_unaligned.rows() - static_cast<Index>(chosen.size()),
                  client.x_unaligned.cols());
  Index at = 0;
  std::size_t next_chosen = 0;
  for (Index i = 0; i < client.x_unaligned.rows(); ++i) {
    if (next_chosen < chosen.size() && chosen[next_chosen] == static_cast<int>(i)) {
      ++next_chosen;
      continue;
    }
    x_unlabeled.row(at++) = client.x_unaligned.row(i);
  }

  stats.ssl = local_ssl_train(client.model, x_labeled, y_labeled, x_unlabeled, cfg.ssl,
                              client.augment, rng);
  return stats;
}

void vanilla_rounds(Parties& p, const ProtocolConfig& cfg, int rounds, CommLedger& ledger,
                    Rng& rng) {
  const Index n = p.clients.at(0).x_overlap.rows();
  const Index batch = std::min<Index>(cfg.ssl.batch, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // shuffle on first use

  for (int round = 0; round < rounds; ++round) {
    if (cursor >= order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    const Index b = std::min<Index>(batch, static_cast<Index>(order.size() - cursor));
    std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(cursor) + b);
    cursor += static_cast<std::size_t>(b);

    IVec yb(b);
    for (Index i = 0; i < b; ++i) yb[i] = p.server.labels[rows[static_cast<std::size_t>(i)]];

    // Up: per-client minibatch reps.
    std::vector<Mat> client_x(p.clients.size());
    std::vector<ForwardTrace> traces(p.clients.size());
    std::vector<Mat> reps;
    for (std::size_t k = 0; k < p.clients.size(); ++k) {
      ClientState& c = p.clients[k];
      Mat xb(b, c.x_overlap.cols());
      for (Index i = 0; i < b; ++i) xb.row(i) = c.x_overlap.row(rows[static_cast<std::size_t>(i)]);
      traces[k] = forward(c.model.extractor(), xb);
      reps.push_back(traces[k].output());
      client_x[k] = std::move(xb);
      ledger.record_upload(c.id, PayloadRole::RepsOverlap,
                           static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg.rep_dim));
    }

    // Server: one classifier step; gradient slices go back down.
    const Mat concat = concat_reps(reps);
    const ForwardTrace trace = forward(p.server.classifier, concat);
    const XentResult xent = softmax_cross_entropy(trace.output(), yb);
    const Gradients g = backward(p.server.classifier, trace, xent.dlogits);
    p.server.classifier = sgd_step(p.server.classifier, g.params, cfg.server_lr);

    Index at = 0;
    for (std::size_t k = 0; k < p.clients.size(); ++k) {
      ClientState& c = p.clients[k];
      const Mat grad_slice = g.input.middleCols(at, cfg.rep_dim);
      at += cfg.rep_dim;
      ledger.record_download(c.id, PayloadRole::PartialGrads,
                             static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg.rep_dim));

      // q > 1 reuses the same (stale) gradient slice for extra local steps.
      MlpParams extractor = c.model.extractor();
      for (int q = 0; q < cfg.q_local_steps; ++q) {
        const ForwardTrace tq = (q == 0) ? traces[k] : forward(extractor, client_x[k]);
        const Gradients gq = backward(extractor, tq, grad_slice);
        extractor = sgd_step(extractor, gq.params, cfg.ssl.lr);
      }
      for (std::size_t li = 0; li < c.model.extractor_layers; ++li)
        c.model.params.layers[li] = extractor.layers[li];
    }
  }
}

EvalSet make_eval_set(const Dataset& test, const std::vector<std::vector<int>>& client_columns) {
  EvalSet e;
  for (const auto& cols : client_columns) e.client_features.push_back(select_columns(test.features, cols));
  e.labels = test.labels;
  return e;
}

std::map<std::string, double> evaluate_parties(const Parties& p, const EvalSet& eval) {
  if (eval.labels.size() == 0) throw std::invalid_argument("evaluate_parties: empty eval set");
  std::vector<Mat> reps;
  for (std::size_t k = 0; k < p.clients.size(); ++k) {
    const ClientState& c = p.clients[k];
    reps.push_back(forward_output(c.model.extractor(), apply_stats(eval.client_features[k], c.stats)));
  }
  const Mat probs = predict_proba(p.server.classifier, concat_reps(reps));
  std::map<std::string, double> m;
  m["accuracy"] = accuracy(argmax_rows(probs), eval.labels);
  if (p.server.num_classes == 2) {
    bool has0 = false, has1 = false;
    for (Index i = 0; i < eval.labels.size(); ++i) (eval.labels[i] == 1 ? has1 : has0) = true;
    if (has0 && has1) m["auc"] = auc(probs.col(1), eval.labels);
  }
  return m;
}

RunReport run_oneshot(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out) {
  const auto t_total = Clock::now();
  Parties p = make_parties(split, cfg);
  CommLedger ledger(cfg.bytes_per_scalar);
  std::map<std::string, double> diag, timings;

  oneshot_core(p, split, cfg, ledger, false, diag, timings);

  auto t0 = Clock::now();
  p.server.overlap_reps.clear();
  for (ClientState& c : p.clients)
    p.server.overlap_reps.push_back(client_extract(c, RepScope::Overlap, ledger));
  timings["reupload"] = seconds_since(t0);

  t0 = Clock::now();
  Rng rng(derive_seed(cfg.seed, "server/train"));
  train_classifier(p.server.classifier, concat_reps(p.server.overlap_reps), p.server.labels,
                   cfg.server_epochs, cfg.server_batch, cfg.server_lr, rng);
  timings["server_train"] = seconds_since(t0);

  std::map<std::string, double> metrics = evaluate_parties(p, make_eval_set(test, split.client_columns));
  metrics.insert(diag.begin(), diag.end());
  timings["total"] = seconds_since(t_total);
  if (ledger_out != nullptr) *ledger_out = ledger;
  return assemble_report("oneshot", cfg, ledger, p, metrics, timings);
}

namespace {

// The entire few-shot pipeline up to and including the final classifier
// training, shared between the plain driver and the finetuning one.
void fewshot_core(Parties& p, const VflSplit& split, const ProtocolConfig& cfg,
                  CommLedger& ledger, std::map<std::string, double>& diag,
                  std::map<std::string, double>& timings) {
  const bool lean = !cfg.fewshot_reupload_overlap;
  oneshot_core(p, split, cfg, ledger, lean, diag, timings);

  // Third upload. Lean flow: unaligned reps only, snapshotted in the same
  // extractor state as the server's cached overlap reps. Faithful flow:
  // refreshed overlap reps ride along in the same message.
  auto t0 = Clock::now();
  p.server.unaligned_reps.assign(p.clients.size(), Mat());
  for (ClientState& c : p.clients) {
    const std::size_t k = static_cast<std::size_t>(c.id);
    if (lean) {
      p.server.unaligned_reps[k] = c.cached_unaligned_reps;
      ledger.record_upload(c.id, PayloadRole::RepsUnaligned,
                           static_cast<std::size_t>(c.cached_unaligned_reps.size()));
    } else {
      const Mat h_o = extract_reps(c, RepScope::Overlap);
      const Mat h_u = extract_reps(c, RepScope::Unaligned);
      p.server.overlap_reps[k] = h_o;
      p.server.unaligned_reps[k] = h_u;
      ledger.record_upload(c.id, PayloadRole::RepsUnaligned,
                           static_cast<std::size_t>(h_o.size()) + static_cast<std::size_t>(h_u.size()));
    }
  }
  timings["upload_unaligned"] = seconds_since(t0);

  t0 = Clock::now();
  train_aux_classifiers(p.server, cfg);
  timings["aux_train"] = seconds_since(t0);

  t0 = Clock::now();
  std::vector<Vec> p_hats;
  for (ClientState& c : p.clients)
    p_hats.push_back(infer_prob(p.server, c.id, cfg.inclusion_threshold, ledger));
  timings["infer_prob"] = seconds_since(t0);

  t0 = Clock::now();
  std::vector<std::thread> workers;
  std::vector<ExpansionStats> expansions(p.clients.size());
  for (std::size_t k = 0; k < p.clients.size(); ++k) {
    workers.emplace_back([&, k]() {
      ClientState& c = p.clients[k];
      Rng rng(derive_seed(cfg.seed, client_tag(cfg.seed, c.id, "ssl/2")));
      expansions[k] = client_expand_and_ssl(c, p_hats[k], cfg, rng);
    });
  }
  for (std::thread& w : workers) w.join();
  for (std::size_t k = 0; k < p.clients.size(); ++k)
    diag["expanded_client_" + std::to_string(p.clients[k].id)] = expansions[k].included;
  timings["expand_ssl"] = seconds_since(t0);

  t0 = Clock::now();
  p.server.overlap_reps.clear();
  for (ClientState& c : p.clients)
    p.server.overlap_reps.push_back(client_extract(c, RepScope::Overlap, ledger));
  timings["reupload"] = seconds_since(t0);

  t0 = Clock::now();
  Rng rng(derive_seed(cfg.seed, "server/train"));
  train_classifier(p.server.classifier, concat_reps(p.server.overlap_reps), p.server.labels,
                   cfg.server_epochs, cfg.server_batch, cfg.server_lr, rng);
  timings["server_train"] = seconds_since(t0);
}

}  // namespace

RunReport run_fewshot(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out) {
  if (split.num_clients() != 2)
    throw std::invalid_argument("run_fewshot: exactly two clients supported");
  const auto t_total = Clock::now();
  Parties p = make_parties(split, cfg);
  CommLedger ledger(cfg.bytes_per_scalar);
  std::map<std::string, double> diag, timings;

  fewshot_core(p, split, cfg, ledger, diag, timings);

  std::map<std::string, double> metrics = evaluate_parties(p, make_eval_set(test, split.client_columns));
  metrics.insert(diag.begin(), diag.end());
  timings["total"] = seconds_since(t_total);
  if (ledger_out != nullptr) *ledger_out = ledger;
  return assemble_report("fewshot", cfg, ledger, p, metrics, timings);
}

RunReport run_vanilla(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out) {
  const auto t_total = Clock::now();
  Parties p = make_parties(split, cfg);
  CommLedger ledger(cfg.bytes_per_scalar);
  std::map<std::string, double> timings;

  auto t0 = Clock::now();
  Rng rng(derive_seed(cfg.seed, "vanilla/batches"));
  vanilla_rounds(p, cfg, cfg.rounds, ledger, rng);
  timings["rounds"] = seconds_since(t0);

  std::map<std::string, double> metrics = evaluate_parties(p, make_eval_set(test, split.client_columns));
  timings["total"] = seconds_since(t_total);
  if (ledger_out != nullptr) *ledger_out = ledger;
  return assemble_report(cfg.q_local_steps > 1 ? "fedbcd" : "vanilla", cfg, ledger, p, metrics,
                         timings);
}

RunReport run_fewshot_finetune(const VflSplit& split, const Dataset& test,
                               const ProtocolConfig& cfg, CommLedger* ledger_out) {
  if (split.num_clients() != 2)
    throw std::invalid_argument("run_fewshot_finetune: exactly two clients supported");
  const auto t_total = Clock::now();
  Parties p = make_parties(split, cfg);
  CommLedger ledger(cfg.bytes_per_scalar);
  std::map<std::string, double> diag, timings;

  fewshot_core(p, split, cfg, ledger, diag, timings);

  auto t0 = Clock::now();
  Rng rng(derive_seed(cfg.seed, "finetune/batches"));
  vanilla_rounds(p, cfg, cfg.rounds, ledger, rng);
  timings["finetune_rounds"] = seconds_since(t0);

  std::map<std::string, double> metrics = evaluate_parties(p, make_eval_set(test, split.client_columns));
  metrics.insert(diag.begin(), diag.end());
  timings["total"] = seconds_since(t_total);
  if (ledger_out != nullptr) *ledger_out = ledger;
  return assemble_report("fewshot_finetune", cfg, ledger, p, metrics, timings);
}

}  // namespace vfl
