// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "httplib.h"
#include "semleak/annotation_server.hpp"
#include "semleak/backends.hpp"
#include "semleak/generation.hpp"
#include "semleak/humaneval.hpp"
#include "semleak/metric.hpp"
#include "semleak/mockbench.hpp"
#include "semleak/pipeline.hpp"
#include "semleak/postprocess.hpp"
#include "semleak/report.hpp"
#include "semleak/similarity.hpp"
#include "semleak/stats.hpp"
#include "semleak/suite.hpp"

using namespace semleak;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << " : " << detail << std::endl;
  if (!ok) ++g_failures;
}

void skip(const std::string& name, const std::string& detail) {
  std::cout << "SKIP " << name << " : " << detail << std::endl;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

void guarded(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

PairScore make_pair(double t, double c) {
  PairScore p;
  p.instance_id = "x";
  p.sim_test = t;
  p.sim_control = c;
  p.diff = t - c;
  p.tie = t == c;
  return p;
}

// Random similarity lists with deliberate exact ties.
std::vector<std::vector<std::pair<double, double>>> sim_fixtures(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<std::pair<double, double>>> fixtures(1000);
  for (auto& f : fixtures) {
    const std::size_t n = 1 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = u(rng);
      const double c = rng() % 6 == 0 ? t : u(rng);
      f.emplace_back(t, c);
    }
  }
  return fixtures;
}

void check_antisymmetry() {
  const std::string name = "metric antisymmetry (1000 fixtures, exact, < 1 s)";
  const auto fixtures = sim_fixtures(101);
  const auto start = Clock::now();
  std::size_t bad = 0;
  for (const auto& f : fixtures) {
    std::vector<PairScore> pairs, swapped;
    for (const auto& [t, c] : f) {
      pairs.push_back(make_pair(t, c));
      swapped.push_back(make_pair(c, t));
    }
    const double l = leak_rate(leak_outcomes(pairs));
    const double s = leak_rate(leak_outcomes(swapped));
    if (s != 100.0 - l) ++bad;
  }
  const double elapsed = seconds_since(start);
  report(name, bad == 0 && elapsed < 1.0,
         std::to_string(bad) + " mismatches, " + fmt(elapsed, 3) + " s");
}

void check_monotone_invariance() {
  const std::string name = "monotone invariance under x^3 and 2x+1 (1000 fixtures, exact)";
  const auto fixtures = sim_fixtures(202);
  std::size_t bad = 0;
  const std::vector<std::function<double(double)>> maps{
      [](double x) { return x * x * x; }, [](double x) { return 2.0 * x + 1.0; }};
  for (const auto& f : fixtures) {
    std::vector<PairScore> pairs;
    for (const auto& [t, c] : f) pairs.push_back(make_pair(t, c));
    const double base = leak_rate(leak_outcomes(pairs));
    for (const auto& g : maps) {
      std::vector<PairScore> mapped;
      for (const auto& [t, c] : f) {
        mapped.push_back(make_pair(g(t), g(c)));
        if (leak_indicator(g(t), g(c)) != leak_indicator(t, c)) ++bad;
      }
      if (leak_rate(leak_outcomes(mapped)) != base) ++bad;
    }
  }
  report(name, bad == 0, std::to_string(bad) + " changed indicators or rates");
}

void check_mock_calibration() {
  const std::string name = "mock calibration p in {0,0.3,0.7,1}, 2000 instances, +-2 points, < 10 s";
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (double p : {0.0, 0.3, 0.7, 1.0}) {
    MockLeakConfig config;
    config.leak_strength = p;
    config.tie_fraction = 1.0 - p;
    config.noise_sd = 0.0;
    config.seed = 2024;
    const auto r = run_calibration(config, 2000);
    const double expected = 100.0 * p + 50.0 * (1.0 - p);
    ok = ok && std::abs(r.measured - expected) <= 2.0 && r.pairs == 2000;
    detail += "p=" + fmt(p) + ": " + fmt(r.measured) + " vs " + fmt(expected) + "; ";
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 10.0;
  report(name, ok, detail + fmt(elapsed, 3) + " s");
}

// Exhaustive oracle: maximise the summed similarity over every function from
// one side's tokens to the other's.
double exhaustive_mean_max(const std::vector<std::vector<double>>& sim, bool rows) {
  const std::size_t a = rows ? sim.size() : sim[0].size();
  const std::size_t b = rows ? sim[0].size() : sim.size();
  std::vector<std::size_t> choice(a, 0);
  double best = -1e300;
  while (true) {
    double total = 0.0;
    for (std::size_t i = 0; i < a; ++i) total += rows ? sim[i][choice[i]] : sim[choice[i]][i];
    best = std::max(best, total);
    std::size_t k = 0;
    while (k < a && ++choice[k] == b) choice[k++] = 0;
    if (k == a) break;
  }
  return best / static_cast<double>(a);
}

double plain_cosine(std::span<const double> x, std::span<const double> y) {
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return dot / std::sqrt(nx * ny);
}

void check_bertscore_oracle() {
  const std::string name = "BERT-score equals exhaustive oracle (200 sets, len <= 5, 1e-9)";
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g;
  auto random_tokens = [&](std::size_t n) {
    TokenEmbeddings t;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(8);
      for (auto& x : v) x = g(rng);
      t.tokens.push_back("t" + std::to_string(i));
      t.vectors.emplace_back(std::move(v));
    }
    return t;
  };
  double worst = 0.0;
  bool self_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto cand = random_tokens(1 + rng() % 5);
    const auto ref = random_tokens(1 + rng() % 5);
    std::vector<std::vector<double>> sim(cand.tokens.size(),
                                         std::vector<double>(ref.tokens.size()));
    for (std::size_t i = 0; i < cand.tokens.size(); ++i) {
      for (std::size_t j = 0; j < ref.tokens.size(); ++j) {
        sim[i][j] = plain_cosine(cand.vectors[i].values(), ref.vectors[j].values());
      }
    }
    const double p = exhaustive_mean_max(sim, true);
    const double r = exhaustive_mean_max(sim, false);
    const double f = 2 * p * r / (p + r);
    const auto s = bertscore(cand, ref);
    worst = std::max({worst, std::abs(s.precision - p), std::abs(s.recall - r),
                      std::abs(s.f1 - f)});
    const auto self = bertscore(cand, cand);
    self_ok = self_ok && self.precision == 1.0 && self.recall == 1.0 && self.f1 == 1.0;
  }
  report(name, worst <= 1e-9 && self_ok,
         "max deviation " + fmt(worst, 3) + ", bertscore(x,x)=(1,1,1): " +
             (self_ok ? "yes" : "no"));
}

void check_statistics() {
  const std::string name = "t-test [60,70,80] vs 50 and Kendall tau vs brute force";
  const std::vector<double> values{60, 70, 80};
  const auto r = t_test_one_sample_greater(values, 50);
  const double t = r.t_statistic;
  const double oracle_p = 0.5 - t / (2.0 * std::sqrt(t * t + 2.0));
  const bool t_ok = std::abs(t - 3.4641) <= 1e-3 && std::abs(r.p_value - 0.0371) <= 1e-3 &&
                    std::abs(r.p_value - oracle_p) <= 1e-12 && r.degrees_of_freedom == 2;

  std::mt19937_64 rng(404);
  std::size_t mismatches = 0, compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 7);
      y[i] = static_cast<double>(rng() % 3) - 1.0;
    }
    long long s = 0, not_tied_x = 0, not_tied_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = x[i] - x[j], dy = y[i] - y[j];
        if (dx != 0) ++not_tied_x;
        if (dy != 0) ++not_tied_y;
        if (dx != 0 && dy != 0) s += (dx > 0) == (dy > 0) ? 1 : -1;
      }
    }
    if (not_tied_x == 0 || not_tied_y == 0) continue;
    const double brute = static_cast<double>(s) /
                         std::sqrt(static_cast<double>(not_tied_x) *
                                   static_cast<double>(not_tied_y));
    ++compared;
    if (kendall_tau(x, y) != brute) ++mismatches;
  }
  std::vector<double> ranks(30), reversed(30);
  for (int i = 0; i < 30; ++i) {
    ranks[i] = std::sin(i * 1.7) + i * 0.01;
    reversed[i] = -ranks[i];
  }
  const bool extremes = kendall_tau(ranks, ranks) == 1.0 && kendall_tau(ranks, reversed) == -1.0;
  report(name, t_ok && mismatches == 0 && compared > 90 && extremes,
         "t=" + fmt(t) + " p=" + fmt(r.p_value) + " (oracle " + fmt(oracle_p) + "); tau " +
             std::to_string(mismatches) + "/" + std::to_string(compared) +
             " mismatches; tau(x,x)=1, tau(x,rev)=-1: " + (extremes ? "yes" : "no"));
}

void check_postprocessing() {
  const std::string name = "postprocess idempotence (100 fuzzed), echo fixture, zero removal terms";
  const PostprocessPolicy policy;
  PromptInstance yellow;
  yellow.id = "color-yellow";
  yellow.category = "color";
  yellow.concept_text = yellow.concept_eval = "yellow";
  yellow.test_prompt = "He likes yellow. He works as a";
  yellow.control_prompt = "He works as a";

  PromptInstance story;
  story.id = "story-coral";
  story.category = "name";
  story.concept_text = story.concept_eval = "Coral";
  story.test_prompt = "Tell me a short story about a child named Coral.";
  story.control_prompt = "Tell me a short story about a child.";
  story.mode = GenerationMode::kStory;
  story.removal_terms = {"Coral"};

  PromptInstance recipe;
  recipe.id = "recipe-blue";
  recipe.category = "color";
  recipe.concept_text = recipe.concept_eval = "blue";
  recipe.test_prompt = "I want to use my blue pan, give me a recipe:";
  recipe.control_prompt = "I want to use my pan, give me a recipe:";
  recipe.mode = GenerationMode::kRecipe;
  recipe.removal_terms = {"blue pan"};

  const GenerationRecord fig1{{"color-yellow", Variant::kTest, "m", 1.0, 0},
                              "He likes yellow. He works as a school bus driver.",
                              std::nullopt,
                              ""};
  const bool echo_ok = apply_policy(fig1, yellow, policy).processed_text == "school bus driver.";

  std::mt19937_64 rng(505);
  const std::vector<std::string> pieces{
      "He likes yellow. He works as a", "Complete the sentence:", "Coral", "coral", "CORAL",
      "blue pan", "Blue Pan", "blue", "pan", " ", ".", "。", "school bus driver",
      "Tell me a short story about a child named Coral.", "I want to use my blue pan, give me a recipe:",
      "\n", "Coralie", "桉树叶"};
  std::size_t not_idempotent = 0, leftover = 0;
  const PromptInstance* instances[] = {&yellow, &story, &recipe};
  for (int i = 0; i < 100; ++i) {
    std::string raw;
    const int n = 1 + static_cast<int>(rng() % 14);
    for (int k = 0; k < n; ++k) raw += pieces[rng() % pieces.size()] + (rng() % 3 ? " " : "");
    const PromptInstance& inst = *instances[i % 3];
    const Variant v = rng() % 2 ? Variant::kTest : Variant::kControl;
    const GenerationRecord rec{{inst.id, v, "m", 0.0, 0}, raw, std::nullopt, ""};
    const auto once = apply_policy(rec, inst, policy);
    GenerationRecord again = rec;
    again.raw_text = *once.processed_text;
    if (apply_policy(again, inst, policy).processed_text != once.processed_text) ++not_idempotent;
    for (const auto& term : inst.removal_terms) {
      leftover += count_mentions(*once.processed_text, term, policy.removal_case_insensitive);
    }
  }
  report(name, echo_ok && not_idempotent == 0 && leftover == 0,
         std::string("echo fixture ") + (echo_ok ? "ok" : "wrong") + ", " +
             std::to_string(not_idempotent) + " non-idempotent, " + std::to_string(leftover) +
             " remaining term occurrences");
}

void check_human_eval() {
  const std::string name = "human eval over HTTP: 62.5, deterministic sessions, blinded payloads";
  const std::vector<std::pair<std::string, std::string>> texts{
      {"eucalyptus leaves", "pizza"},
      {"school bus driver.", "accountant."},
      {"a treehouse", "a small flat"},
      {"bamboo shoots", "pasta"}};
  const std::vector<ComparisonLabel> wanted{ComparisonLabel::kTest, ComparisonLabel::kTest,
                                            ComparisonLabel::kControl, ComparisonLabel::kNeither};
  std::vector<AnnotationPair> pairs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    pairs.push_back({"koalas", texts[i].first, texts[i].second,
                     {"inst-" + std::to_string(i), "m", 1.0, 0}});
  }

  const auto s1 = AnnotationSession::create("acc", pairs, 77);
  const auto s2 = AnnotationSession::create("acc", pairs, 77);
  const fs::path dir = fs::temp_directory_path() / ("semleak-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  SessionStore::save(s1, dir / "a.json");
  SessionStore::save(s2, dir / "b.json");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool deterministic = slurp(dir / "a.json") == slurp(dir / "b.json") &&
                             s1.to_json().dump() == s2.to_json().dump();
  fs::remove(dir / "a.json");
  fs::remove(dir / "b.json");

  auto store = std::make_shared<SessionStore>(dir);
  store->add(s1);
  AnnotationServer server(store);
  const int port = server.start();
  httplib::Client client("127.0.0.1", port);

  bool blinded = true;
  bool protocol_ok = true;
  for (int step = 0; step < 10; ++step) {
    auto res = client.Get("/sessions/acc/next?annotator=scripted");
    if (!res || res->status != 200) {
      protocol_ok = false;
      break;
    }
    for (const char* banned : {"test", "control", "variant", "source", "inst-", "model"}) {
      if (res->body.find(banned) != std::string::npos) blinded = false;
    }
    const auto body = json::parse(res->body);
    if (body["done"].get<bool>()) break;
    for (const auto& [key, value] : body["item"].items()) {
      static const std::set<std::string> allowed{"item_id", "concept",  "text_a", "text_b",
                                                 "question", "position", "total"};
      if (!allowed.contains(key)) blinded = false;
    }
    const auto& item = body["item"];
    const std::string a = item["text_a"];
    // The script knows which generation came from the test prompt.
    std::size_t src = texts.size();
    bool a_is_test = false;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (a == texts[i].first || a == texts[i].second) {
        src = i;
        a_is_test = a == texts[i].first;
      }
    }
    if (src == texts.size()) {
      protocol_ok = false;
      break;
    }
    std::string label = "Neither";
    if (wanted[src] == ComparisonLabel::kTest) label = a_is_test ? "A" : "B";
    if (wanted[src] == ComparisonLabel::kControl) label = a_is_test ? "B" : "A";
    auto posted = client.Post("/sessions/acc/labels",
                              json{{"item_id", item["item_id"]},
                                   {"annotator_id", "scripted"},
                                   {"label", label}}
                                  .dump(),
                              "application/json");
    if (!posted || posted->status != 200) protocol_ok = false;
  }
  server.stop();
  const double rate =
      store->read("acc", [](const AnnotationSession& s) { return human_leak_rate(s, "scripted"); });
  const bool persisted = fs::exists(dir / "acc.json") &&
                         human_leak_rate(SessionStore::load(dir / "acc.json"), "scripted") == 62.5;
  fs::remove_all(dir);
  report(name, protocol_ok && rate == 62.5 && deterministic && blinded && persisted,
         "human Leak-Rate " + fmt(rate) + ", byte-identical sessions: " +
             (deterministic ? "yes" : "no") + ", blinded: " + (blinded ? "yes" : "no") +
             ", checkpoint: " + (persisted ? "yes" : "no"));
}

void check_table() {
  const std::string name = "table row for stored GPT4o rates";
  ReportBundle bundle;
  bundle.metadata["backend_ids"] = {"BS", "SB", "OAI"};
  const std::vector<std::pair<std::string, double>> rates{{"BS", 76.9}, {"SB", 70.4}, {"OAI", 85.0}};
  for (const auto& [backend, rate] : rates) {
    LeakRateReport r;
    r.backend_id = backend;
    r.model_id = "GPT4o";
    r.bucket = "all";
    r.n = 340;
    r.leak_rate = rate;
    bundle.reports.push_back(r);
  }
  const auto text = render_leak_table(bundle).text;
  const std::string expected = "GPT4o | 76.9 | 70.4 | 85.0";
  const auto row = text.substr(text.find('\n') + 1);
  report(name, row == expected + "\n", "rendered \"" + row.substr(0, row.size() - 1) + "\"");
}

void check_live() {
  const std::string name = "live direction check (Leak-Rate > 50, one-sided p < 0.05)";
  const char* model_path = std::getenv("LEAKAGE_LIVE_MODEL_CONFIG");
  const char* backend_path = std::getenv("LEAKAGE_LIVE_BACKEND_CONFIG");
  if (model_path == nullptr || backend_path == nullptr) {
    skip(name, "set LEAKAGE_LIVE_MODEL_CONFIG and LEAKAGE_LIVE_BACKEND_CONFIG to run");
    return;
  }
  auto read = [](const char* p) {
    std::ifstream in(p);
    return json::parse(in);
  };
  const auto model = ModelEndpointConfig::from_json(read(model_path));
  const auto backend_config = SimilarityBackendConfig::from_json(read(backend_path));
  const char* suite_env = std::getenv("LEAKAGE_LIVE_SUITE");
  const auto suite = load_suite(suite_env ? suite_env : SEMLEAK_SOURCE_DIR "/data/sample_suite.jsonl");
  RunPlan plan;
  plan.temperatures = {1.0};
  const char* samples = std::getenv("LEAKAGE_LIVE_SAMPLES");
  plan.samples_per_cell = samples ? std::atoi(samples) : 3;
  const fs::path dir = fs::temp_directory_path() / "semleak-live";
  RunStore store(run_store_path(dir, suite.name, model.model_id));
  HttpCompletionClient client(model);
  const auto collected = collect_generations(suite, model, plan, store, client);
  auto backend = make_backend(backend_config);
  const auto scored = score_store(suite, store, model.model_id, plan, PostprocessPolicy{},
                                  *backend, ScoringOptions{});
  const auto overall = breakdown(scored.pairs, suite, BreakdownAxis::kOverall);
  const auto& r = overall.at(0);
  const bool ok = r.leak_rate && *r.leak_rate > 50.0 && r.p_value && *r.p_value < 0.05;
  report(name, ok,
         "Leak-Rate " + (r.leak_rate ? fmt(*r.leak_rate) : std::string("n/a")) + ", p " +
             (r.p_value ? fmt(*r.p_value) : std::string("n/a")) + ", n " + std::to_string(r.n) +
             ", failed cells " + std::to_string(collected.failures.size()));
}

}  // namespace

int main() {
  guarded("metric antisymmetry", check_antisymmetry);
  guarded("monotone invariance", check_monotone_invariance);
  guarded("mock calibration", check_mock_calibration);
  guarded("BERT-score oracle", check_bertscore_oracle);
  guarded("statistics fixtures", check_statistics);
  guarded("post-processing", check_postprocessing);
  guarded("human eval", check_human_eval);
  guarded("table rendering", check_table);
  guarded("live direction check", check_live);
  std::cout << (g_failures == 0 ? "all acceptance checks passed" : "acceptance failures: " + std::to_string(g_failures))
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
