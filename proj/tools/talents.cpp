// Command-line front end: data collection, training, evaluation, plotting
// and the game server.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "talents/eval/experiments.hpp"
#include "talents/eval/pipeline.hpp"
#include "talents/eval/plot.hpp"
#include "talents/service/registry.hpp"
#include "talents/service/server.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace talents;

namespace {

void log_line(const std::string& s) { std::cerr << s << std::endl; }

struct PopulationArgs {
  int size = 12;
  std::uint64_t seed = 1;
  int train_members = 9;

  void add(CLI::App* app) {
    app->add_option("--pop-size", size, "population size")->check(CLI::Range(2, 1000));
    app->add_option("--population-seed", seed, "population seed");
    app->add_option("--train-members", train_members, "members [0, n) are training partners, the rest held out");
  }
  std::vector<partners::PopulationMember> members() const {
    if (train_members < 1 || train_members > size) throw ConfigError("--train-members must lie in [1, --pop-size]");
    return partners::make_population(size, seed);
  }
  std::vector<partners::ScriptedPolicy> holdout() const {
    std::vector<partners::ScriptedPolicy> out;
    const auto pop = members();
    for (int i = train_members; i < size; ++i) out.push_back(pop[static_cast<std::size_t>(i)].policy);
    if (out.empty()) throw ConfigError("no held-out members (--train-members equals --pop-size)");
    return out;
  }
  partners::ScriptedPolicy find(const std::string& id) const {
    for (const auto& m : members())
      if (m.policy.id() == id) return m.policy;
    throw ConfigError("no population member " + id);
  }
};

eval::Assets load_assets(const service::CheckpointPaths& p, eval::AgentKind kind) {
  eval::Assets a;
  if (kind == eval::AgentKind::best_response) {
    a.best_response = std::make_shared<const cooperator::CooperatorPolicy>(cooperator::load_policy(p.best_response));
    return a;
  }
  a.dec = std::make_shared<const strategy::VaeModel<float>>(strategy::load_vae<float>(p.vae));
  a.clusters = strategy::load_clusters(p.clusters);
  a.talents = std::make_shared<const cooperator::CooperatorPolicy>(cooperator::load_policy(p.talents));
  adaptation::check_dimensions(a.clusters, *a.talents, *a.dec);
  return a;
}

std::vector<kitchen::Trajectory> load_all(const partners::Dataset& ds) {
  std::vector<kitchen::Trajectory> out;
  out.reserve(ds.size());
  for (const auto& e : ds.entries) out.push_back(ds.load(e));
  return out;
}

// Skip set for VAE windows and cluster points: the reference filler plus any
// held-out ids.
std::set<std::string> skip_set(const std::vector<std::string>& holdout) {
  std::set<std::string> s(holdout.begin(), holdout.end());
  s.insert(partners::kReferenceId);
  return s;
}

partners::Dataset training_split(const std::string& dir, const std::vector<std::string>& holdout) {
  auto ds = partners::load_dataset(dir);
  if (holdout.empty()) return ds;
  return partners::holdout_split(ds, holdout).first;
}

void copy_into(const fs::path& from, const fs::path& to) {
  fs::create_directories(to.parent_path());
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

void ensure_parent(const std::string& path) {
  const auto dir = fs::path(path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strategy-conditioned cooperator toolkit"};
  app.require_subcommand(1);

  // collect
  auto* collect = app.add_subcommand("collect", "roll out the scripted population and write a trajectory dataset");
  PopulationArgs collect_pop;
  collect_pop.add(collect);
  std::vector<std::string> collect_layouts = {"open"};
  int episodes_per_pair = 1, collect_workers = 1, collect_length = 0;
  std::uint64_t collect_seed = 1;
  std::string collect_out;
  bool collect_reference = false, collect_all = false, fixed_checkpoint = false;
  collect->add_option("--layouts", collect_layouts, "layout names")->expected(1, -1);
  collect->add_option("--episodes-per-pair", episodes_per_pair, "episodes per pair and layout")->check(CLI::PositiveNumber);
  collect->add_option("--out", collect_out, "output directory")->required();
  collect->add_option("--seed", collect_seed, "rollout seed");
  collect->add_option("--workers", collect_workers, "worker threads");
  collect->add_option("--episode-length", collect_length, "ticks per episode (0: layout default)");
  collect->add_flag("--reference", collect_reference, "pair each policy with the neutral filler instead of all pairs");
  collect->add_flag("--all-members", collect_all, "include held-out members (default: training members only)");
  collect->add_flag("--fixed-checkpoint", fixed_checkpoint, "do not cycle the emulated checkpoint noise");

  // train-vae
  auto* train_vae = app.add_subcommand("train-vae", "train the strategy VAE on a dataset");
  std::string vae_data, vae_out, vae_curve;
  std::vector<std::string> vae_holdout;
  strategy::VaeConfig vcfg;
  vcfg.epochs = 20;
  vcfg.obs_dropout = 0.5;
  vcfg.token_dropout = 0.3;
  vcfg.seed = 3;
  train_vae->add_option("--data", vae_data, "dataset directory")->required();
  train_vae->add_option("--out", vae_out, "checkpoint path")->required();
  train_vae->add_option("--holdout", vae_holdout, "policy ids to exclude");
  train_vae->add_option("--curve", vae_curve, "write the per-epoch loss curve here (JSON)");
  train_vae->add_option("--latent-dim", vcfg.latent_dim);
  train_vae->add_option("--window", vcfg.window, "history ticks");
  train_vae->add_option("--horizon", vcfg.horizon, "predicted macro actions");
  train_vae->add_option("--beta", vcfg.beta, "KL weight");
  train_vae->add_option("--batch-size", vcfg.batch_size);
  train_vae->add_option("--step-size", vcfg.step_size);
  train_vae->add_option("--epochs", vcfg.epochs);
  train_vae->add_option("--max-windows", vcfg.max_windows);
  train_vae->add_option("--seed", vcfg.seed);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "embed seat streams and pick k by silhouette");
  std::string cl_data, cl_vae, cl_out, k_range = "2:8";
  std::vector<std::string> cl_holdout;
  std::uint64_t cl_seed = 1;
  cluster->add_option("--data", cl_data, "dataset directory")->required();
  cluster->add_option("--vae", cl_vae, "VAE checkpoint")->required();
  cluster->add_option("--out", cl_out, "cluster file")->required();
  cluster->add_option("--k-range", k_range, "lo:hi");
  cluster->add_option("--holdout", cl_holdout, "policy ids to exclude");
  cluster->add_option("--seed", cl_seed);

  // train-coop
  auto* train_coop = app.add_subcommand("train-coop", "train the cooperator against generative partners");
  std::string tc_clusters, tc_vae, tc_out, tc_dump;
  std::vector<std::string> tc_layouts = {"open"};
  bool tc_unconditioned = false;
  cooperator::TrainConfig tcfg;
  train_coop->add_option("--clusters", tc_clusters, "cluster file")->required();
  train_coop->add_option("--vae", tc_vae, "VAE checkpoint (decoder)")->required();
  train_coop->add_option("--layout", tc_layouts, "training layout(s)")->expected(1, -1);
  train_coop->add_option("--out", tc_out, "policy checkpoint")->required();
  train_coop->add_option("--steps", tcfg.total_steps, "environment steps");
  train_coop->add_option("--episodes-per-update", tcfg.episodes_per_update);
  train_coop->add_option("--lr", tcfg.lr);
  train_coop->add_option("--entropy", tcfg.entropy_coef);
  train_coop->add_option("--shaping", tcfg.shaping, "shaping weight");
  train_coop->add_option("--seed", tcfg.seed);
  train_coop->add_option("--workers", tcfg.workers);
  train_coop->add_option("--dump-dir", tc_dump, "where a non-finite batch is written");
  train_coop->add_flag("--unconditioned", tc_unconditioned, "train the unconditioned best-response baseline");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "collect, train and cluster for one layout; write a checkpoint root");
  eval::PipelineConfig pcfg;
  pcfg.coop.total_steps = 600000;
  std::string pl_root = "checkpoints", pl_cache = "pipeline-cache";
  pipeline->add_option("--layout", pcfg.layout);
  pipeline->add_option("--out", pl_root, "checkpoint root (<root>/<layout>/...)");
  pipeline->add_option("--cache", pl_cache, "cache directory");
  pipeline->add_option("--steps", pcfg.coop.total_steps, "cooperator environment steps per policy");
  pipeline->add_option("--episodes", pcfg.episodes, "episodes per training member");
  pipeline->add_option("--workers", pcfg.coop.workers);
  pipeline->add_option("--seed", pcfg.seed);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluation experiments");
  ev->require_subcommand(1);
  std::string ev_agent = "talents", ev_out = "report", ev_root = "checkpoints";
  std::vector<std::string> ev_layouts = {"hallway"};
  int ev_episodes = 30, ev_workers = 1;
  std::uint64_t ev_seed = 0;
  PopulationArgs ev_pop;
  std::string partner_a = "bp09", partner_b = "bp10";
  bool keep_belief = false;
  auto eval_opts = [&](CLI::App* s) {
    s->add_option("--agent", ev_agent, "talents | talents-static | best-response");
    s->add_option("--layout", ev_layouts)->expected(1, -1);
    s->add_option("--episodes", ev_episodes)->check(CLI::PositiveNumber);
    s->add_option("--seed", ev_seed);
    s->add_option("--out", ev_out, "report directory");
    s->add_option("--checkpoints", ev_root, "checkpoint root");
    s->add_option("--workers", ev_workers);
    ev_pop.add(s);
  };
  auto* ev_holdout = ev->add_subcommand("holdout", "agent vs held-out scripted partners");
  eval_opts(ev_holdout);
  ev_holdout->add_flag("--keep-belief", keep_belief, "keep belief traces in the records");
  auto* ev_switch = ev->add_subcommand("switch", "partner A for the first half, B for the second");
  eval_opts(ev_switch);
  ev_switch->add_option("--partner-a", partner_a);
  ev_switch->add_option("--partner-b", partner_b);
  auto* ev_grid = ev->add_subcommand("grid", "conditioning cluster vs generative partner cluster");
  eval_opts(ev_grid);

  // plot
  auto* plot = app.add_subcommand("plot", "SVG figures from report files");
  std::vector<std::string> plot_reports;
  std::string plot_out, plot_kind = "halves", plot_title;
  plot->add_option("kind", plot_kind, "halves | belief")->check(CLI::IsMember({"halves", "belief"}));
  plot->add_option("--report", plot_reports, "report .jsonl file(s)")->required()->expected(1, -1);
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title);

  // serve
  auto* serve = app.add_subcommand("serve", "run the game server");
  std::string serve_config;
  int serve_port = -1;
  serve->add_option("--config", serve_config, "JSON config file");
  serve->add_option("--port", serve_port, "override the port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*collect) {
      const auto pop = collect_pop.members();
      std::vector<partners::ScriptedPolicy> policies;
      const int n = collect_all ? collect_pop.size : collect_pop.train_members;
      for (int i = 0; i < n; ++i) policies.push_back(pop[static_cast<std::size_t>(i)].policy);
      partners::CollectOptions co;
      co.out_dir = collect_out;
      co.workers = collect_workers;
      co.episode_length = collect_length;
      co.reference = collect_reference;
      co.vary_checkpoints = !fixed_checkpoint;
      const auto ds = partners::collect_rollouts(policies, collect_layouts, episodes_per_pair, collect_seed, co);
      std::cout << "wrote " << ds.size() << " trajectories to " << collect_out << "\n";
    } else if (*train_vae) {
      const auto ds = training_split(vae_data, vae_holdout);
      const auto data = strategy::build_sequence_data(load_all(ds), vcfg.horizon, skip_set(vae_holdout));
      log_line(std::to_string(ds.size()) + " episodes, " + std::to_string(data.windows.size()) + " windows");
      auto r = strategy::train_vae<float>(data, vcfg, [](int epoch, const strategy::EpochStats& s) {
        log_line("epoch " + std::to_string(epoch) + " loss " + std::to_string(s.loss) + " recon " +
                 std::to_string(s.recon) + " kl " + std::to_string(s.kl));
      });
      ensure_parent(vae_out);
      strategy::save_vae(vae_out, r.model);
      if (!vae_curve.empty()) {
        json c = json::array();
        for (const auto& s : r.curve) c.push_back({{"loss", s.loss}, {"recon", s.recon}, {"kl", s.kl}});
        std::ofstream(vae_curve) << c.dump(2) << '\n';
      }
      std::cout << "wrote " << vae_out << "\n";
    } else if (*cluster) {
      const auto m = strategy::load_vae<float>(cl_vae);
      const auto ds = training_split(cl_data, cl_holdout);
      const auto skip = skip_set(cl_holdout);
      const auto data = strategy::build_sequence_data(load_all(ds), m.cfg.horizon, skip);
      const auto pts = eval::strategy_points(m, data, skip);
      const auto sk = strategy::select_k(pts.points, strategy::parse_k_range(k_range), cl_seed);
      json extra = {{"k_values", sk.k_values}, {"mean_silhouette", sk.mean_silhouette}, {"points", pts.points.size()}};
      json members = json::object();
      for (std::size_t i = 0; i < pts.policies.size(); ++i) members[pts.policies[i]].push_back(sk.assignments[i]);
      extra["assignments_by_policy"] = members;
      ensure_parent(cl_out);
      strategy::save_clusters(cl_out, sk.clusters, extra);
      for (std::size_t i = 0; i < sk.k_values.size(); ++i)
        std::cout << "k=" << sk.k_values[i] << " silhouette " << sk.mean_silhouette[i] << "\n";
      std::cout << "selected k=" << sk.best_k << ", wrote " << cl_out << "\n";
    } else if (*train_coop) {
      const auto clusters = strategy::load_clusters(tc_clusters);
      auto dec = std::make_shared<const strategy::VaeModel<float>>(strategy::load_vae<float>(tc_vae));
      tcfg.layouts = tc_layouts;
      tcfg.policy.conditioned = !tc_unconditioned;
      tcfg.dump_dir = tc_dump;
      auto r = cooperator::train_cooperator(clusters, dec, tcfg, [](int u, const cooperator::TrainResult& res) {
        if (u % 25 != 24 || res.episode_scores.empty()) return;
        const std::size_t n = std::min<std::size_t>(20, res.episode_scores.size());
        double m = 0.0;
        for (std::size_t i = res.episode_scores.size() - n; i < res.episode_scores.size(); ++i) m += res.episode_scores[i];
        log_line("update " + std::to_string(u + 1) + " steps " + std::to_string(res.env_steps) + " recent score " +
                 std::to_string(m / static_cast<double>(n)));
      });
      ensure_parent(tc_out);
      cooperator::save_trained_policy(tc_out, r.policy, tcfg);
      std::cout << "wrote " << tc_out << "\n";
    } else if (*pipeline) {
      const auto p = eval::build_pipeline(pcfg, pl_cache, log_line);
      const fs::path src = fs::path(pl_cache) / (pcfg.layout + "-" + hex64(pcfg.hash()));
      const fs::path dst = fs::path(pl_root) / pcfg.layout;
      for (const char* f : {"vae.ckpt", "vae.ckpt.bin", "clusters.json", "talents.policy", "talents.policy.bin", "br.policy",
                            "br.policy.bin", "pipeline.json"})
        copy_into(src / f, dst / f);
      std::cout << "k=" << p.best_k << ", wrote " << dst.string() << "\n";
    } else if (*ev) {
      const auto kind = eval::parse_agent(ev_agent);
      service::ServiceConfig sc;
      sc.checkpoint_root = ev_root;
      eval::EvalReport r;
      if (*ev_holdout) {
        std::map<std::string, eval::Assets> assets;
        for (const auto& l : ev_layouts) assets[l] = load_assets(sc.paths_for(l), kind);
        r = eval::eval_vs_holdout(assets, kind, ev_pop.holdout(), ev_layouts, ev_episodes, ev_seed, keep_belief, ev_workers);
      } else if (*ev_switch) {
        if (ev_layouts.size() != 1) throw ConfigError("switch takes exactly one --layout");
        r = eval::partner_switch_experiment(load_assets(sc.paths_for(ev_layouts[0]), kind), kind, ev_pop.find(partner_a),
                                            ev_pop.find(partner_b), ev_layouts[0], ev_episodes, ev_seed, ev_workers);
      } else {
        if (ev_layouts.size() != 1) throw ConfigError("grid takes exactly one --layout");
        const auto a = load_assets(sc.paths_for(ev_layouts[0]), eval::AgentKind::talents);
        const auto g = eval::cross_condition_grid(a.talents, a.clusters, a.dec, ev_layouts[0], ev_episodes, ev_seed, ev_workers);
        r = eval::grid_report(g, ev_layouts[0], ev_seed);
      }
      eval::write_report(ev_out, r);
      const auto s = r.summary();
      std::cout << r.experiment << " " << r.agent << ": " << r.episodes.size() << " episodes, mean " << s["mean"]
                << ", second half " << s["second_half_mean"] << " -> " << ev_out << "\n";
    } else if (*plot) {
      ensure_parent(plot_out);
      std::vector<eval::EvalReport> reports;
      for (const auto& p : plot_reports) reports.push_back(eval::read_report(p));
      if (plot_kind == "halves") {
        eval::write_text(plot_out, eval::halves_svg(reports, plot_title.empty() ? "reward per half" : plot_title));
      } else {
        if (reports.size() != 1) throw ConfigError("belief plot takes exactly one report");
        const auto& r = reports[0];
        if (r.episodes.empty() || r.episodes[0].belief.empty()) throw ConfigError("report has no belief traces");
        const int T = kitchen::initial_state(kitchen::builtin_layout(r.episodes[0].layout), 0).episode_length;
        const int mark = r.episodes[0].partner_b.empty() ? -1 : T / 2;
        eval::write_text(plot_out, eval::belief_svg(r, plot_title.empty() ? "belief" : plot_title, mark));
      }
      std::cout << "wrote " << plot_out << "\n";
    } else if (*serve) {
      service::ServiceConfig sc = serve_config.empty() ? service::ServiceConfig{} : service::load_service_config(serve_config);
      service::apply_env(sc);
      if (serve_port >= 0) sc.port = serve_port;
      service::Server server(sc, service::CheckpointAgentFactory(sc));
      const auto port = server.listen();
      std::cout << "listening on " << sc.bind << ":" << port << std::endl;
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
      });
      server.run();
      g_stop = 1;
      watcher.join();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
