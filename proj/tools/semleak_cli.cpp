#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "semleak/annotation_server.hpp"
#include "semleak/backends.hpp"
#include "semleak/errors.hpp"
#include "semleak/generation.hpp"
#include "semleak/humaneval.hpp"
#include "semleak/mockbench.hpp"
#include "semleak/pipeline.hpp"
#include "semleak/report.hpp"
#include "semleak/stub_servers.hpp"
#include "semleak/suite.hpp"
#include "semleak/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semleak;

namespace {

constexpr int kExitError = 1;
constexpr int kExitAuth = 2;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

void emit_outputs(const ReportBundle& bundle, const fs::path& out_dir) {
  write_bundle(bundle, out_dir / "bundle.json");
  const auto table = render_leak_table(bundle);
  write_text(out_dir / "table.txt", table.text);
  write_text(out_dir / "leak_rates.csv", table.csv);
  write_text(out_dir / "reports.csv", reports_csv(bundle.reports));
  for (const auto& h : bundle.histograms) {
    write_text(out_dir / "histograms" / (file_safe(h.backend_id + "__" + h.model_id) + ".csv"),
               histogram_csv(h.histogram));
  }
}

struct RunArgs {
  std::string suite;
  std::vector<std::string> models;
  std::vector<std::string> backends;
  std::vector<double> temperatures{0.0, 0.5, 1.0, 1.5};
  int samples = 10;
  double tie_epsilon = 0.0;
  double epsilon_slack = kDefaultEpsilonSlack;
  std::string out = "out";
  std::uint64_t seed = 0;
  int bins = 20;
};

void add_run_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--suite", a.suite, "Prompt suite (JSONL)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--model", a.models, "Model endpoint config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--backend", a.backends, "Similarity backend config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--temperatures", a.temperatures, "Comma-separated temperatures")
      ->delimiter(',');
  cmd->add_option("--samples", a.samples, "Samples per cell");
  cmd->add_option("--tie-epsilon", a.tie_epsilon, "Similarity difference treated as a tie");
  cmd->add_option("--epsilon-slack", a.epsilon_slack, "Slack for automatic A/B/Neither labels");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--seed", a.seed, "Recorded in the bundle");
  cmd->add_option("--bins", a.bins, "Histogram bins");
}

int run_pipeline(const RunArgs& a, bool collect) {
  const PromptSuite suite = load_suite(a.suite);
  RunPlan plan;
  plan.temperatures = a.temperatures;
  plan.samples_per_cell = a.samples;
  plan.validate();
  const PostprocessPolicy policy;
  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);

  std::vector<ModelEndpointConfig> models;
  for (const auto& path : a.models) models.push_back(ModelEndpointConfig::from_json(read_json_file(path)));
  std::vector<SimilarityBackendConfig> backend_configs;
  for (const auto& path : a.backends) {
    backend_configs.push_back(SimilarityBackendConfig::from_json(read_json_file(path)));
  }

  std::size_t failures = 0;
  std::vector<PairScore> all_pairs;
  json model_meta = json::array();
  for (const auto& model : models) {
    model_meta.push_back(model.to_json());
    RunStore store(run_store_path(out_dir, suite.name, model.model_id));
    if (collect) {
      HttpCompletionClient client(model);
      const auto summary = collect_generations(suite, model, plan, store, client);
      std::cerr << model.model_id << ": fetched " << summary.fetched << ", cached "
                << summary.cached << ", failed " << summary.failures.size() << '\n';
      for (const auto& f : summary.failures) {
        std::cerr << "  " << cache_key(f.cell) << ": " << f.reason << '\n';
      }
      failures += summary.failures.size();
    }
    for (const auto& bc : backend_configs) {
      auto backend = make_backend(bc);
      ScoringOptions options;
      options.tie_epsilon = a.tie_epsilon;
      options.parallelism = bc.max_parallel_requests;
      auto scored = score_store(suite, store, model.model_id, plan, policy, *backend, options);
      std::size_t excluded = 0;
      for (const auto& p : scored.pairs) excluded += p.excluded() ? 1 : 0;
      std::cerr << model.model_id << " x " << bc.backend_id << ": " << scored.pairs.size()
                << " pairs, " << excluded << " excluded, " << scored.missing_pairs
                << " missing\n";
      all_pairs.insert(all_pairs.end(), scored.pairs.begin(), scored.pairs.end());
    }
  }
  if (all_pairs.empty()) throw Error("no scorable pairs; nothing to report");

  json backend_meta = json::array();
  json backend_ids = json::array();
  for (const auto& bc : backend_configs) {
    backend_meta.push_back(bc.to_json());
    backend_ids.push_back(bc.backend_id);
  }
  json metadata = {{"suite", suite.name},
                   {"suite_path", suite.source_path},
                   {"models", model_meta},
                   {"backends", backend_meta},
                   {"backend_ids", backend_ids},
                   {"plan", plan.to_json()},
                   {"policy", policy.to_json()}};
  BundleOptions options;
  options.tie_epsilon = a.tie_epsilon;
  options.epsilon_slack = a.epsilon_slack;
  options.histogram_bins = a.bins;
  options.seed = a.seed;
  ReportBundle bundle = build_bundle(suite, all_pairs, metadata, options);
  for (const auto& model : models) {
    bundle.model_families[model.model_id] = model.family.empty() ? model.model_id : model.family;
  }
  emit_outputs(bundle, out_dir);
  std::cout << render_leak_table(bundle).text;
  if (failures > 0) std::cerr << failures << " cells failed; rerun to retry them\n";
  return 0;
}

std::vector<AnnotationPair> pairs_from_store(const PromptSuite& suite, const RunStore& store,
                                             const std::string& model_id,
                                             std::optional<double> temperature,
                                             std::optional<int> sample, std::size_t limit) {
  const PostprocessPolicy policy;
  std::vector<AnnotationPair> pairs;
  for (const auto& inst : suite.instances) {
    for (const auto& rec : store.records()) {
      if (rec.cell.instance_id != inst.id || rec.cell.variant != Variant::kTest ||
          rec.cell.model_id != model_id) {
        continue;
      }
      if (temperature && rec.cell.temperature != *temperature) continue;
      if (sample && rec.cell.sample_index != *sample) continue;
      CellCoordinates control_cell = rec.cell;
      control_cell.variant = Variant::kControl;
      auto control = store.find(control_cell);
      if (!control) continue;
      const auto test_text = apply_policy(rec, inst, policy).processed_text.value_or("");
      const auto control_text = apply_policy(*control, inst, policy).processed_text.value_or("");
      if (test_text.empty() || control_text.empty()) continue;
      pairs.push_back({inst.concept_text, test_text, control_text,
                       {inst.id, model_id, rec.cell.temperature, rec.cell.sample_index}});
      if (limit > 0 && pairs.size() >= limit) return pairs;
    }
  }
  return pairs;
}

std::atomic<bool> g_stop{false};

void wait_for_signal() {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic leakage evaluation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kCodeVersion));

  std::function<int()> action;

  // validate
  std::string validate_suite;
  auto* validate = app.add_subcommand("validate", "Lint a prompt suite");
  validate->add_option("--suite", validate_suite)->required();
  validate->callback([&] {
    action = [&] {
      const auto suite = load_suite(validate_suite);
      std::cout << suite.name << ": " << suite.instances.size() << " instances ok\n";
      return 0;
    };
  });

  // run / score
  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Collect, postprocess, score and report");
  add_run_flags(run, run_args);
  run->callback([&] { action = [&] { return run_pipeline(run_args, true); }; });
  RunArgs score_args;
  auto* score = app.add_subcommand("score", "Re-score cached generations");
  add_run_flags(score, score_args);
  score->callback([&] { action = [&] { return run_pipeline(score_args, false); }; });

  // report
  std::string report_bundle;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Render tables from a stored bundle");
  report->add_option("--bundle", report_bundle)->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Also write table, CSV and histogram files here");
  report->callback([&] {
    action = [&] {
      const auto bundle = read_bundle(report_bundle);
      std::cout << render_leak_table(bundle).text;
      if (!report_out.empty()) {
        const fs::path out = report_out;
        const auto table = render_leak_table(bundle);
        write_text(out / "table.txt", table.text);
        write_text(out / "leak_rates.csv", table.csv);
        write_text(out / "reports.csv", reports_csv(bundle.reports));
        for (const auto& h : bundle.histograms) {
          write_text(out / "histograms" / (file_safe(h.backend_id + "__" + h.model_id) + ".csv"),
                     histogram_csv(h.histogram));
        }
      }
      return 0;
    };
  });

  // mock
  double mock_p = 0.5;
  std::optional<double> mock_q;
  double mock_noise = 0.0;
  std::size_t mock_instances = 2000;
  std::uint64_t mock_seed = 0;
  auto* mock = app.add_subcommand("mock", "Calibrate the metric against a known leak rate");
  mock->add_option("--p", mock_p, "Leak strength")->check(CLI::Range(0.0, 1.0));
  mock->add_option("--q", mock_q, "Tie fraction (default 1 - p)")->check(CLI::Range(0.0, 1.0));
  mock->add_option("--noise-sd", mock_noise);
  mock->add_option("--instances", mock_instances);
  mock->add_option("--seed", mock_seed);
  mock->callback([&] {
    action = [&] {
      MockLeakConfig config;
      config.leak_strength = mock_p;
      config.tie_fraction = mock_q.value_or(1.0 - mock_p);
      config.noise_sd = mock_noise;
      config.seed = mock_seed;
      const auto r = run_calibration(config, mock_instances);
      std::cout << "Leak-Rate: " << format_rate(r.measured) << " ± "
                << format_rate(r.standard_error) << " (expected "
                << format_rate(r.expected.value) << ", n=" << r.pairs << ")\n";
      return 0;
    };
  });

  // serve-stubs
  std::string stub_suite;
  double stub_p = 0.5;
  double stub_q = 0.0;
  int stub_model_port = 8801;
  int stub_embed_port = 8802;
  auto* stubs = app.add_subcommand("serve-stubs", "Offline model and embedding endpoints");
  stubs->add_option("--suite", stub_suite)->required()->check(CLI::ExistingFile);
  stubs->add_option("--p", stub_p);
  stubs->add_option("--q", stub_q);
  stubs->add_option("--model-port", stub_model_port);
  stubs->add_option("--embed-port", stub_embed_port);
  stubs->callback([&] {
    action = [&] {
      MockLeakConfig config;
      config.leak_strength = stub_p;
      config.tie_fraction = stub_q;
      config.validate();
      StubModelServer model(mock_model_responder(load_suite(stub_suite), config));
      StubEmbeddingServer embed;
      model.start(stub_model_port);
      embed.start(stub_embed_port);
      std::cout << "model endpoint " << model.base_url() << "\nembedding endpoint "
                << embed.base_url() << std::endl;
      wait_for_signal();
      model.stop();
      embed.stop();
      return 0;
    };
  });

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Human evaluation sessions");
  annotate->require_subcommand(1);
  std::string ann_dir = "sessions";

  std::string create_suite, create_generations, create_model, create_session;
  std::optional<double> create_temperature;
  std::optional<int> create_sample;
  std::size_t create_limit = 0;
  std::uint64_t create_seed = 0;
  bool create_per_annotator = false;
  auto* create = annotate->add_subcommand("create", "Build a blinded session from generations");
  create->add_option("--dir", ann_dir);
  create->add_option("--suite", create_suite)->required()->check(CLI::ExistingFile);
  create->add_option("--generations", create_generations)->required()->check(CLI::ExistingFile);
  create->add_option("--model-id", create_model)->required();
  create->add_option("--session", create_session)->required();
  create->add_option("--temperature", create_temperature);
  create->add_option("--sample", create_sample);
  create->add_option("--limit", create_limit);
  create->add_option("--seed", create_seed);
  create->add_flag("--per-annotator-order", create_per_annotator);
  create->callback([&] {
    action = [&] {
      const auto suite = load_suite(create_suite);
      RunStore store(create_generations);
      const auto pairs = pairs_from_store(suite, store, create_model, create_temperature,
                                          create_sample, create_limit);
      const auto session =
          AnnotationSession::create(create_session, pairs, create_seed, create_per_annotator);
      const fs::path path = fs::path(ann_dir) / (create_session + ".json");
      if (fs::exists(path)) throw Error(path.string() + " already exists");
      fs::create_directories(ann_dir);
      SessionStore::save(session, path);
      std::cout << path.string() << ": " << session.items().size() << " items\n";
      return 0;
    };
  });

  std::string serve_host = "127.0.0.1";
  int serve_port = 8800;
  std::string serve_static;
  auto* serve = annotate->add_subcommand("serve", "Serve sessions over HTTP");
  serve->add_option("--dir", ann_dir);
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_option("--static", serve_static, "Directory with the annotator UI build");
  serve->callback([&] {
    action = [&] {
      auto store = std::make_shared<SessionStore>(ann_dir);
      const auto loaded = store->load_all();
      AnnotationServer server(store, serve_static);
      const int port = server.start(serve_host, serve_port);
      std::cout << loaded << " sessions on http://" << serve_host << ':' << port << std::endl;
      wait_for_signal();
      server.stop();
      return 0;
    };
  });

  std::string io_session, io_file;
  auto* exp = annotate->add_subcommand("export", "Write labels as JSONL");
  exp->add_option("--dir", ann_dir);
  exp->add_option("--session", io_session)->required();
  exp->add_option("--out", io_file)->required();
  exp->callback([&] {
    action = [&] {
      const auto session = SessionStore::load(fs::path(ann_dir) / (io_session + ".json"));
      std::ostringstream out;
      const auto records = export_labels(session);
      for (const auto& r : records) out << label_record_to_json(r).dump() << '\n';
      write_text(io_file, out.str());
      std::cout << records.size() << " labels\n";
      return 0;
    };
  });

  auto* imp = annotate->add_subcommand("import", "Merge labels from JSONL");
  imp->add_option("--dir", ann_dir);
  imp->add_option("--session", io_session)->required();
  imp->add_option("--in", io_file)->required()->check(CLI::ExistingFile);
  imp->callback([&] {
    action = [&] {
      const fs::path path = fs::path(ann_dir) / (io_session + ".json");
      auto session = SessionStore::load(path);
      std::vector<LabelRecord> records;
      std::ifstream in(io_file);
      std::string line;
      while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        records.push_back(label_record_from_json(json::parse(line)));
      }
      const auto summary = import_labels(session, records);
      SessionStore::save(session, path);
      std::cout << summary.accepted << " accepted, " << summary.duplicates << " duplicates\n";
      return 0;
    };
  });

  std::vector<std::string> stats_annotators;
  std::string stats_bundle, stats_backend;
  double stats_slack = kDefaultEpsilonSlack;
  bool stats_partial = false;
  auto* st = annotate->add_subcommand("stats", "Human Leak-Rate and agreement");
  st->add_option("--dir", ann_dir);
  st->add_option("--session", io_session)->required();
  st->add_option("--annotator", stats_annotators)->required();
  st->add_option("--bundle", stats_bundle, "Compare with automatic labels")
      ->check(CLI::ExistingFile);
  st->add_option("--backend", stats_backend, "Backend id in the bundle");
  st->add_option("--epsilon-slack", stats_slack);
  st->add_flag("--allow-partial", stats_partial);
  st->callback([&] {
    action = [&] {
      const auto session = SessionStore::load(fs::path(ann_dir) / (io_session + ".json"));
      for (const auto& a : stats_annotators) {
        std::cout << a << " Leak-Rate: " << format_rate(human_leak_rate(session, a, stats_partial))
                  << '\n';
      }
      for (std::size_t i = 0; i + 1 < stats_annotators.size(); ++i) {
        for (std::size_t k = i + 1; k < stats_annotators.size(); ++k) {
          std::cout << "tau(" << stats_annotators[i] << ", " << stats_annotators[k]
                    << "): " << text::format_number(
                                    agreement(session, stats_annotators[i], stats_annotators[k]))
                    << '\n';
        }
      }
      if (!stats_bundle.empty()) {
        const auto bundle = read_bundle(stats_bundle);
        std::vector<PairScore> pairs;
        for (const auto& p : bundle.pairs) {
          if (stats_backend.empty() || p.backend_id == stats_backend) pairs.push_back(p);
        }
        for (const auto& a : stats_annotators) {
          std::cout << "tau(" << a << ", auto): "
                    << text::format_number(human_vs_auto(session, a, pairs, stats_slack)) << '\n';
        }
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << '\n';
    return kExitAuth;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
