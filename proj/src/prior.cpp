#include "gridrl/prior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "gridrl/errors.hpp"
#include "gridrl/optim.hpp"

namespace gridrl {

static_assert(std::endian::native == std::endian::little, "dataset files assume little-endian");

SurrogateParams SurrogateParams::init(int n_actions, const SurrogateConfig& config,
                                      std::mt19937_64& rng) {
  SurrogateParams p;
  p.encoder = EncoderParams::init(config.encoder, rng);
  p.action_embedding = ad::glorot_uniform(n_actions, config.action_dim, rng);
  const int in = config.encoder.hidden + config.action_dim;
  // One glorot draw over the joint fan-in, split into its row blocks.
  const Matrix w1 = ad::glorot_uniform(in, config.risk_hidden, rng);
  p.risk_wz = w1.topRows(config.encoder.hidden);
  p.risk_wa = w1.bottomRows(config.action_dim);
  p.risk_b1 = Matrix::Zero(1, config.risk_hidden);
  p.risk_w2 = ad::glorot_uniform(config.risk_hidden, 1, rng);
  p.risk_b2 = Matrix::Zero(1, 1);
  return p;
}

void SurrogateParams::collect(ad::ParamList& out) {
  encoder.collect(out, "surrogate.encoder");
  out.push_back({"surrogate.action_embedding", &action_embedding});
  out.push_back({"surrogate.risk_wz", &risk_wz});
  out.push_back({"surrogate.risk_wa", &risk_wa});
  out.push_back({"surrogate.risk_b1", &risk_b1});
  out.push_back({"surrogate.risk_w2", &risk_w2});
  out.push_back({"surrogate.risk_b2", &risk_b2});
}

std::uint64_t surrogate_checksum(const SurrogateParams& params) {
  ad::ParamList list;
  const_cast<SurrogateParams&>(params).collect(list);
  return ad::checksum(list);
}

Eigen::VectorXd predict_risks(const GraphObs& graph, std::span<const int> actions,
                              const SurrogateParams& params, const Matrix* table) {
  for (int a : actions) {
    if (a < 0 || a >= params.n_actions()) throw UsageError("action index out of range");
  }
  const ad::EvalContext ctx;
  const GraphBatch batch = make_batch(graph);
  const Matrix z = encode(ctx, batch, params.encoder).z;
  const Matrix own = table ? Matrix() : action_table(ctx, params);
  const Matrix& tab = table ? *table : own;
  // risk_head for a single graph, without materializing the gathered rows.
  const Eigen::RowVectorXd shared = z * params.risk_wz + params.risk_b1;
  const Eigen::RowVectorXd w2 = params.risk_w2.col(0).transpose();
  const double b2 = params.risk_b2(0, 0);
  Eigen::RowVectorXd pre(shared.size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(actions.size()));
  for (std::size_t q = 0; q < actions.size(); ++q) {
    pre.noalias() = tab.row(actions[q]) + shared;
    out[static_cast<Eigen::Index>(q)] =
        std::max(0.0, pre.cwiseMax(ad::kLeakySlope * pre).dot(w2) + b2);
  }
  return out;
}

double predict_risk(const GraphObs& graph, int action, const SurrogateParams& params) {
  const int one[] = {action};
  return predict_risks(graph, one, params)[0];
}

double physics_score(double predicted_risk, double tau) {
  if (!(tau > 0.0)) throw UsageError("temperature must be positive");
  return -predicted_risk / tau;
}

Eigen::VectorXd gibbs_prior(const Eigen::VectorXd& scores, std::span<const std::uint8_t> mask) {
  if (static_cast<Eigen::Index>(mask.size()) != scores.size()) {
    throw ShapeError("mask and scores differ in length");
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) peak = std::max(peak, scores[static_cast<Eigen::Index>(i)]);
  }
  if (peak == -std::numeric_limits<double>::infinity()) {
    throw UsageError("gibbs prior needs at least one feasible action");
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const auto k = static_cast<Eigen::Index>(i);
    p[k] = std::exp(scores[k] - peak);
    total += p[k];
  }
  return p / total;
}

std::vector<int> select_topk(const Eigen::VectorXd& scores, std::span<const std::uint8_t> mask,
                             int k) {
  if (static_cast<Eigen::Index>(mask.size()) != scores.size()) {
    throw ShapeError("mask and scores differ in length");
  }
  std::vector<int> feasible;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) feasible.push_back(static_cast<int>(i));
  }
  if (feasible.empty()) throw UsageError("no feasible action to select from");
  const auto keep = static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(feasible.size())));
  const auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(feasible.begin(), feasible.begin() + static_cast<long>(keep), feasible.end(),
                    better);
  feasible.resize(keep);
  return feasible;
}

CandidateSet topk_candidates(const GraphObs& graph, std::span<const std::uint8_t> mask,
                             const SurrogateParams& params, const PriorConfig& config,
                             const Matrix* table) {
  std::vector<int> feasible;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) feasible.push_back(static_cast<int>(i));
  }
  if (feasible.empty()) throw UsageError("no feasible action to select from");
  const Eigen::VectorXd risks = predict_risks(graph, feasible, params, table);
  Eigen::VectorXd scores = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mask.size()), 0.0);
  for (std::size_t j = 0; j < feasible.size(); ++j) {
    scores[feasible[j]] = physics_score(risks[static_cast<Eigen::Index>(j)], config.tau);
  }
  CandidateSet out;
  out.actions = select_topk(scores, mask, config.k);
  out.scores.reserve(out.actions.size());
  for (int a : out.actions) out.scores.push_back(scores[a]);
  return out;
}

// ---------------------------------------------------------------------------

RiskDataset collect_risk_dataset(const GridModel& grid, std::span<const Episode> episodes,
                                 const ActionLibrary& lib, const EnvConfig& env,
                                 const CollectConfig& config) {
  if (config.samples_per_state < 1) throw UsageError("samples_per_state must be >= 1");
  RiskDataset data;
  for (const Episode& ep : episodes) {
    if (config.max_states > 0 && static_cast<int>(data.states.size()) >= config.max_states) break;
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(ep.index), 0x5eedU};
    std::mt19937_64 rng(seq);
    const Simulator sim(grid, ep, env);
    Observation obs = sim.reset();
    while (!obs.terminal) {
      Action action = Action::noop();
      if (hazard(obs, env.hazard_threshold) &&
          (config.max_states <= 0 || static_cast<int>(data.states.size()) < config.max_states)) {
        const auto mask = feasibility_mask(obs, lib);
        std::vector<int> others;
        for (std::size_t i = 1; i < mask.size(); ++i) {
          if (mask[i]) others.push_back(static_cast<int>(i));
        }
        std::vector<int> labeled{0};
        const auto extra = std::min<std::size_t>(others.size(),
                                                 static_cast<std::size_t>(config.samples_per_state - 1));
        std::sample(others.begin(), others.end(), std::back_inserter(labeled),
                    static_cast<long>(extra), rng);

        const int state = static_cast<int>(data.states.size());
        data.states.push_back(build_graph(obs, grid));
        for (int a : labeled) {
          const StepResult r = sim.simulate_one_step(obs, lib[a]);
          const double target = r.info.blackout ? env.risk_cap : std::min(risk(r.obs), env.risk_cap);
          data.samples.push_back({state, a, target});
        }
        std::uniform_int_distribution<std::size_t> pick(0, others.size());
        const std::size_t choice = pick(rng);
        action = choice == 0 ? Action::noop() : lib[others[choice - 1]];
      }
      obs = sim.step(obs, action).obs;
    }
  }
  return data;
}

namespace {

constexpr const char* kDatasetFormat = "gridrl-risk-dataset-v1";

template <class T>
void write_raw(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <class T>
void read_raw(std::istream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw ParseError("dataset file is truncated");
}

// Eigen is column-major; files are row-major.
void write_rows(std::ostream& out, const Matrix& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  write_raw(out, r.data(), static_cast<std::size_t>(r.size()));
}

Matrix read_rows(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r(rows, cols);
  read_raw(in, r.data(), static_cast<std::size_t>(r.size()));
  return r;
}

}  // namespace

void save_dataset(const RiskDataset& data, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = kDatasetFormat;
  header["node_features"] = kNodeFeatures;
  header["edge_features"] = kEdgeFeatures;
  header["n_samples"] = data.samples.size();
  auto& states = header["states"] = nlohmann::json::array();
  for (const GraphObs& g : data.states) states.push_back({{"n_nodes", g.n_nodes}, {"n_edges", g.n_edges()}});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifactError("cannot write " + path.string());
  out << header.dump() << '\n';
  for (const GraphObs& g : data.states) {
    write_raw(out, g.src.data(), g.src.size());
    write_raw(out, g.dst.data(), g.dst.size());
    write_raw(out, g.edge_line.data(), g.edge_line.size());
    write_rows(out, g.node_x);
    write_rows(out, g.edge_e);
  }
  for (const RiskSample& s : data.samples) {
    const std::int32_t ids[2] = {s.state, s.action};
    write_raw(out, ids, 2);
    write_raw(out, &s.target, 1);
  }
}

RiskDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("dataset not found: " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
    if (header.at("format") != kDatasetFormat) throw ParseError("unknown dataset format");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad dataset header: ") + e.what());
  }
  const int nf = header.at("node_features");
  const int ef = header.at("edge_features");
  RiskDataset data;
  for (const auto& s : header.at("states")) {
    GraphObs g;
    g.n_nodes = s.at("n_nodes");
    const std::size_t n_edges = s.at("n_edges");
    g.src.resize(n_edges);
    g.dst.resize(n_edges);
    g.edge_line.resize(n_edges);
    data.states.push_back(std::move(g));
  }
  for (GraphObs& g : data.states) {
    read_raw(in, g.src.data(), g.src.size());
    read_raw(in, g.dst.data(), g.dst.size());
    read_raw(in, g.edge_line.data(), g.edge_line.size());
    g.node_x = read_rows(in, g.n_nodes, nf);
    g.edge_e = read_rows(in, g.n_edges(), ef);
  }
  const std::size_t n_samples = header.at("n_samples");
  data.samples.resize(n_samples);
  for (RiskSample& s : data.samples) {
    std::int32_t ids[2];
    read_raw(in, ids, 2);
    read_raw(in, &s.target, 1);
    s.state = ids[0];
    s.action = ids[1];
    if (s.state < 0 || s.state >= static_cast<int>(data.states.size())) {
      throw ParseError("sample refers to a missing state");
    }
  }
  return data;
}

std::pair<RiskDataset, RiskDataset> split_by_state(const RiskDataset& data, double fraction,
                                                   std::uint64_t seed) {
  std::vector<int> order(data.states.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_second = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(order.size())));
  std::vector<int> remap(data.states.size());
  std::pair<RiskDataset, RiskDataset> out;
  // Keep original state order within each side.
  std::vector<char> second(data.states.size(), 0);
  for (std::size_t i = 0; i < n_second; ++i) second[static_cast<std::size_t>(order[i])] = 1;
  for (std::size_t s = 0; s < data.states.size(); ++s) {
    RiskDataset& dst = second[s] ? out.second : out.first;
    remap[s] = static_cast<int>(dst.states.size());
    dst.states.push_back(data.states[s]);
  }
  for (const RiskSample& smp : data.samples) {
    RiskDataset& dst = second[static_cast<std::size_t>(smp.state)] ? out.second : out.first;
    dst.samples.push_back({remap[static_cast<std::size_t>(smp.state)], smp.action, smp.target});
  }
  return out;
}

namespace {

std::vector<std::vector<int>> samples_by_state(const RiskDataset& data) {
  std::vector<std::vector<int>> by_state(data.states.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    by_state[static_cast<std::size_t>(data.samples[i].state)].push_back(static_cast<int>(i));
  }
  return by_state;
}

struct Query {
  GraphBatch batch;
  std::vector<int> graph_of_query;
  std::vector<int> actions;
  Matrix targets;
  std::vector<int> sample_ids;
};

Query make_query(const RiskDataset& data, const std::vector<std::vector<int>>& by_state,
                 std::span<const int> states) {
  Query q;
  std::vector<const GraphObs*> graphs;
  for (std::size_t k = 0; k < states.size(); ++k) {
    graphs.push_back(&data.states[static_cast<std::size_t>(states[k])]);
    for (int i : by_state[static_cast<std::size_t>(states[k])]) {
      q.graph_of_query.push_back(static_cast<int>(k));
      q.actions.push_back(data.samples[static_cast<std::size_t>(i)].action);
      q.sample_ids.push_back(i);
    }
  }
  q.batch = make_batch(graphs);
  q.targets.resize(static_cast<Eigen::Index>(q.actions.size()), 1);
  for (std::size_t j = 0; j < q.sample_ids.size(); ++j) {
    q.targets(static_cast<Eigen::Index>(j), 0) = data.samples[static_cast<std::size_t>(q.sample_ids[j])].target;
  }
  return q;
}

}  // namespace

void init_output_bias(SurrogateParams& params, const RiskDataset& data) {
  if (data.samples.empty()) throw UsageError("cannot initialize from an empty dataset");
  // Match the mean pre-activation to the mean target, so the outer ReLU is
  // open on average whatever the random weights produce.
  const auto by_state = samples_by_state(data);
  const ad::EvalContext ctx;
  const Matrix table = action_table(ctx, params);
  const Matrix wz = params.risk_wz;
  std::vector<int> states(by_state.size());
  std::iota(states.begin(), states.end(), 0);
  double target = 0.0, pre = 0.0;
  constexpr std::size_t kChunk = 32;
  for (std::size_t begin = 0; begin < states.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, states.size() - begin);
    const Query q = make_query(data, by_state, std::span<const int>(states).subspan(begin, n));
    if (q.actions.empty()) continue;
    const Matrix z = encode(ctx, q.batch, params.encoder).z;
    const Matrix hidden = ad::leaky_relu(ad::add(
        ad::add(ad::gather_rows(Matrix(z * wz), q.graph_of_query), ad::gather_rows(table, q.actions)),
        params.risk_b1));
    pre += (hidden * params.risk_w2).sum();
    target += q.targets.sum();
  }
  const auto count = static_cast<double>(data.samples.size());
  params.risk_b2(0, 0) = (target - pre) / count;
}

std::vector<double> train_surrogate(const RiskDataset& data, SurrogateParams& params,
                                    const SurrogateTrainConfig& config,
                                    const std::function<void(int, double)>& on_epoch) {
  if (data.samples.empty()) throw UsageError("cannot train the surrogate on an empty dataset");
  ad::ParamList list;
  params.collect(list);
  const auto ptrs = ad::pointers(list);
  const auto cptrs = ad::const_pointers(list);
  ad::AdamState adam;
  adam.lr = config.lr;

  const auto by_state = samples_by_state(data);
  std::vector<int> states;
  for (std::size_t s = 0; s < by_state.size(); ++s) {
    if (!by_state[s].empty()) states.push_back(static_cast<int>(s));
  }
  std::mt19937_64 rng(config.seed);
  std::vector<double> curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(states.begin(), states.end(), rng);
    double total = 0.0;
    std::size_t seen = 0;
    std::size_t begin = 0;
    while (begin < states.size()) {
      std::size_t end = begin;
      std::size_t count = 0;
      while (end < states.size() && count < static_cast<std::size_t>(config.batch_size)) {
        count += by_state[static_cast<std::size_t>(states[end])].size();
        ++end;
      }
      const Query q = make_query(data, by_state, std::span<const int>(states).subspan(begin, end - begin));
      begin = end;

      ad::Tape tape;
      const ad::TapeContext ctx{tape};
      const ad::Var z = encode(ctx, q.batch, params.encoder).z;
      const ad::Var table = action_table(ctx, params);
      const ad::Var pred = risk_head(ctx, params, z, table, q.graph_of_query, q.actions);
      const ad::Var loss = ad::mean(ad::square(ad::sub(pred, tape.constant(q.targets))));
      const auto grads = ad::grad(tape, loss, cptrs);
      ad::adam_step(ptrs, grads, adam);
      total += loss.value()(0, 0) * static_cast<double>(q.actions.size());
      seen += q.actions.size();
    }
    curve.push_back(total / static_cast<double>(seen));
    if (on_epoch) on_epoch(epoch, curve.back());
  }
  return curve;
}

Eigen::VectorXd predict_dataset(const RiskDataset& data, const SurrogateParams& params) {
  const auto by_state = samples_by_state(data);
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.samples.size()));
  const ad::EvalContext ctx;
  constexpr std::size_t kChunk = 32;
  const Matrix table = action_table(ctx, params);
  std::vector<int> states(by_state.size());
  std::iota(states.begin(), states.end(), 0);
  for (std::size_t begin = 0; begin < states.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, states.size() - begin);
    const Query q = make_query(data, by_state, std::span<const int>(states).subspan(begin, n));
    if (q.actions.empty()) continue;
    const Matrix z = encode(ctx, q.batch, params.encoder).z;
    const Matrix pred = risk_head(ctx, params, z, table, q.graph_of_query, q.actions);
    for (std::size_t j = 0; j < q.sample_ids.size(); ++j) {
      out[q.sample_ids[j]] = pred(static_cast<Eigen::Index>(j), 0);
    }
  }
  return out;
}

double surrogate_mse(const RiskDataset& data, const SurrogateParams& params) {
  if (data.samples.empty()) return 0.0;
  const Eigen::VectorXd pred = predict_dataset(data, params);
  double total = 0.0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const double d = pred[static_cast<Eigen::Index>(i)] - data.samples[i].target;
    total += d * d;
  }
  return total / static_cast<double>(data.samples.size());
}

}  // namespace gridrl
