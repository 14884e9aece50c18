#pragma once

#include "vfl/comm.hpp"
#include "vfl/data.hpp"
#include "vfl/kmeans.hpp"
#include "vfl/nn.hpp"
#include "vfl/report.hpp"
#include "vfl/ssl.hpp"

#include <cstdint>
#include <vector>

namespace vfl {

struct ProtocolConfig {
  Index rep_dim = 8;
  std::vector<Index> extractor_hidden = {16};  // ReLU layers before the rep layer
  std::vector<Index> server_hidden = {32};     // ReLU layers in the server classifier

  int server_epochs = 2000;  // E_s, local compute only, no comm cost
  double server_lr = 0.01;
  int server_batch = 32;
  // Optional training of the server classifier on the first uploads before
  // partial gradients are taken. 0 = gradients at fresh init, which keeps
  // the per-sample gradients clustered by label.
  int server_grad_warmup_epochs = 0;

  SslConfig ssl;          // E_c, batch, client lr, lambda_u, tau_fm
  AugmentConfig augment;  // feature_means filled per client at setup

  double inclusion_threshold = 0.95;  // t in the inclusion probability
  int q_local_steps = 1;              // local steps per round (1 = plain split training)
  int rounds = 500;                   // round budget for split training

  TempLabelOptions temp_labels;

  // Third few-shot upload also carries refreshed overlap reps, as in the
  // source algorithm. Off by default: the lean flow uploads unaligned reps
  // only, and server-side estimation stays in the representation space of
  // the overlap reps it already holds (see decisions ledger).
  bool fewshot_reupload_overlap = false;
  // Joint classifier starts from the current server classifier instead of a
  // fresh init.
  bool reuse_joint_classifier = false;

  std::size_t bytes_per_scalar = 4;
  std::uint64_t seed = 1;
};

struct ClientState {
  int id = 0;
  Mat x_overlap;    // standardized local features
  Mat x_unaligned;  // standardized, labels unknown to the client
  FeatureStats stats;
  LocalModel model;  // extractor; labeled head attached once C is known
  AugmentConfig augment;
  IVec temp_labels;          // from gradient clustering
  Mat cached_unaligned_reps; // few-shot lean flow: reps in the first-upload space
  IVec expanded_rows;        // unaligned row indices pulled into the labeled set
  IVec expanded_labels;
};

struct ServerState {
  MlpParams classifier;           // theta_c
  std::vector<MlpParams> aux;     // one per client
  MlpParams joint;                // on concatenated reps
  IVec labels;                    // Y_o, never leaves the server
  std::vector<Mat> overlap_reps;  // latest upload per client
  std::vector<Mat> unaligned_reps;
  int num_classes = 0;
};

struct Parties {
  std::vector<ClientState> clients;
  ServerState server;
};

// Standardizes each client's features on its own rows only, initializes
// extractors (per-client seeds derived from cfg.seed) and the server
// classifier. No communication happens here.
Parties make_parties(const VflSplit& split, const ProtocolConfig& cfg);

void attach_local_head(ClientState& client, int num_classes, const ProtocolConfig& cfg);

enum class RepScope { Overlap, Unaligned };

// Pure local computation: features through the extractor.
Mat extract_reps(const ClientState& client, RepScope scope);

// Extract and upload; the ledger gains one reps message.
Mat client_extract(const ClientState& client, RepScope scope, CommLedger& ledger);

struct PartialGrads {
  std::vector<Mat> per_client;  // loss gradient w.r.t. each client's rep block
  int num_classes = 0;
};

// Single full-batch pass of the current server classifier over the
// concatenated overlap reps (ascending client id). Downloads each client's
// gradient slice; the class count rides in the same message (+1 scalar).
// The classifier is not updated here (warmup excepted).
PartialGrads server_partial_grads(ServerState& server, const ProtocolConfig& cfg,
                                  CommLedger& ledger);

// Scaled-dot-product attention estimate of the missing representations:
// softmax(h_u_a h_o_a^T / sqrt(d)) h_o_b, rows are convex combinations of
// h_o_b rows.
Mat sdpa_estimate(const Mat& h_u_a, const Mat& h_o_a, const Mat& h_o_b);

// Per-client aux classifiers on single-client overlap reps plus the joint
// classifier on concatenated reps, trained on the server's cached uploads.
void train_aux_classifiers(ServerState& server, const ProtocolConfig& cfg);

// One sample's inclusion probability: joint confidence if the local and
// joint predictions agree and both confidences strictly exceed t, else 0.
double inclusion_probability(int y_local, double p_local, int y_joint, double p_joint, double t);

// Inclusion probabilities for client k's uploaded unaligned reps; downloads
// one inclusion_probs message. Two-client protocol only.
Vec infer_prob(const ServerState& server, int client_id, double threshold, CommLedger& ledger);

struct ExpansionStats {
  int included = 0;
  SslTrainStats ssl;
};

// Bernoulli(p_hat) inclusion of unaligned samples, pseudo-labeled by the
// current local model, then a fresh SSL run over the enlarged labeled set;
// included samples leave the unlabeled pool.
ExpansionStats client_expand_and_ssl(ClientState& client, const Vec& p_hat,
                                     const ProtocolConfig& cfg, Rng& rng);

// Split-network training rounds over the overlap set: per round one
// minibatch travels up as reps, the server steps its classifier and sends
// gradient slices down, and every client locally applies cfg.q_local_steps
// chain-rule steps (stale gradient when q > 1).
void vanilla_rounds(Parties& parties, const ProtocolConfig& cfg, int rounds, CommLedger& ledger,
                    Rng& rng);

// Minibatch SGD of a standalone classifier on fixed inputs.
void train_classifier(MlpParams& model, const Mat& inputs, const IVec& labels, int epochs,
                      int batch, double lr, Rng& rng);

struct EvalSet {
  std::vector<Mat> client_features;  // raw test columns per client
  IVec labels;
};

EvalSet make_eval_set(const Dataset& test, const std::vector<std::vector<int>>& client_columns);

// Test metrics of the current extractors + server classifier: accuracy,
// plus AUC on the positive class when the task is binary.
std::map<std::string, double> evaluate_parties(const Parties& parties, const EvalSet& eval);

// Drivers. ledger_out, when given, receives a copy of the run's ledger so
// callers can dump the raw message log.
RunReport run_oneshot(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out = nullptr);
RunReport run_fewshot(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out = nullptr);
// q_local_steps = 1 is plain split-network training; > 1 reuses stale
// gradients for extra local steps per round.
RunReport run_vanilla(const VflSplit& split, const Dataset& test, const ProtocolConfig& cfg,
                      CommLedger* ledger_out = nullptr);
// Few-shot run followed by warm-started split-network rounds, one ledger.
RunReport run_fewshot_finetune(const VflSplit& split, const Dataset& test,
                               const ProtocolConfig& cfg, CommLedger* ledger_out = nullptr);

}  // namespace vfl
