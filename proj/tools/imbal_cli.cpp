// imbal: command-line front end for the battery arbitrage pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "imbal/config.hpp"
#include "imbal/error.hpp"
#include "imbal/eval.hpp"

namespace fs = std::filesystem;
using namespace imbal;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string agent;
  std::string out;
  std::string controllers;
  std::string prices;
  std::string day;
  std::string grid;
  std::string teacher;
  std::string student;
};

RunConfig load_config(const Options& o, bool required) {
  RunConfig c;
  if (!o.config_path.empty())
    c = read_config(o.config_path);
  else if (required)
    throw CLI::RequiredError("--config");
  if (o.seed) c.seed = *o.seed;
  c.train.seed = c.seed;
  c.distill.seed = c.seed;
  return c;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

PriceSeries load_series(const std::string& path) {
  LoadResult r = load_price_csv(path);
  if (r.dropped_days > 0) std::cerr << "note: dropped " << r.dropped_days << " incomplete day(s) from " << path << "\n";
  return std::move(r.series);
}

// Evaluation days: every day of --prices when given, else the test split.
PriceSeries eval_series(const Options& o, const RunConfig& c) {
  if (!o.prices.empty()) return load_series(o.prices);
  return split_dataset(load_series(c.paths.prices)).test;
}

RbcThresholds rbc_thresholds(const RunConfig& c, const PriceSeries& fallback) {
  if (fs::exists(c.paths.prices)) {
    const auto split = split_dataset(load_series(c.paths.prices));
    if (!split.train.empty()) return quartile_thresholds(split.train);
  }
  std::cerr << "note: no training prices at " << c.paths.prices << "; RBC thresholds taken from evaluation prices\n";
  return quartile_thresholds(fallback);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// rbc | idle | charge | discharge | <checkpoint>[:layer]
std::vector<Controller> make_controllers(const Options& o, const RunConfig& c, const PriceSeries& series) {
  std::vector<Controller> out;
  for (const std::string& spec : split_list(o.controllers)) {
    if (spec == "rbc") {
      out.push_back(make_rbc_controller(rbc_thresholds(c, series)));
    } else if (spec == "idle" || spec == "charge" || spec == "discharge") {
      out.push_back(make_constant_controller(spec == "idle" ? Action::kIdle
                                             : spec == "charge" ? Action::kCharge
                                                                : Action::kDischarge));
    } else {
      std::string path = spec;
      bool with_layer = false;
      if (path.size() > 6 && path.ends_with(":layer")) {
        path.resize(path.size() - 6);
        with_layer = true;
      }
      out.push_back(controller_from_checkpoint(spec, read_checkpoint(path), with_layer));
    }
  }
  if (out.empty()) throw Error(ErrorKind::kInvalidArgument, "--controllers is empty");
  return out;
}

GridSpec grid_of(const Options& o, const GridSpec& fallback) {
  if (o.grid.empty()) return fallback;
  std::ifstream in(o.grid);
  if (!in) throw Error(ErrorKind::kIo, "cannot open grid " + o.grid);
  GridSpec g;
  try {
    g = nlohmann::json::parse(in).get<GridSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

fs::path out_dir(const Options& o, const RunConfig& c) { return o.out.empty() ? fs::path(c.paths.out_dir) : fs::path(o.out); }

int cmd_synth(const Options& o) {
  const RunConfig c = load_config(o, false);
  const fs::path out = o.out.empty() ? fs::path(c.paths.prices) : fs::path(o.out);
  const PriceSeries series = generate_synthetic_prices(c.synth, c.seed);
  auto f = open_out(out);
  write_price_csv(f, series);
  std::cout << "wrote " << series.day_count() << " day(s) to " << out.string() << "\n";
  return 0;
}

int cmd_ingest(const Options& o) {
  const RunConfig c = load_config(o, true);
  const std::string path = o.prices.empty() ? c.paths.prices : o.prices;
  const LoadResult r = load_price_csv(path);
  const DatasetSplit split = split_dataset(r.series);
  nlohmann::json j{{"days", r.series.day_count()},
                   {"dropped_days", r.dropped_days},
                   {"train_days", split.train.day_count()},
                   {"validation_days", split.validation.day_count()},
                   {"test_days", split.test.day_count()}};
  if (!split.train.empty()) {
    const auto th = quartile_thresholds(split.train);
    j["rbc_thresholds"] = {{"lower", th.lower}, {"upper", th.upper}};
  }
  const fs::path dir = out_dir(o, c);
  auto f = open_out(dir / "histogram.csv");
  write_histogram_csv(f, price_histogram(r.series, c.eval.histogram_bin_width));
  j["fraction_below_minus_200"] = fraction_below(r.series, -200.0);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  RunConfig c = load_config(o, true);
  if (!o.agent.empty()) c.agent = agent_kind_from_string(o.agent);
  const std::string path = o.prices.empty() ? c.paths.prices : o.prices;
  const DatasetSplit split = split_dataset(load_series(path));
  const TrainResult r = train(c.agent, split, c.battery, c.train);
  const fs::path ckpt = o.out.empty() ? fs::path(c.paths.teacher) : fs::path(o.out);
  write_checkpoint(ckpt, r.checkpoint);
  write_curve_csv(ckpt.parent_path() / "curve.csv", r.curve);
  std::cout << "wrote " << ckpt.string();
  if (!r.curve.empty()) std::cout << " (final validation profit " << r.curve.back().validation_profit << " EUR/day/MWh)";
  std::cout << "\n";
  return 0;
}

int cmd_distill(const Options& o) {
  const RunConfig c = load_config(o, true);
  const Checkpoint teacher = read_checkpoint(o.teacher.empty() ? c.paths.teacher : o.teacher);
  const std::string path = o.prices.empty() ? c.paths.prices : o.prices;
  const DatasetSplit split = split_dataset(load_series(path));
  const DistillResult r = train_student(teacher, make_day_profiles(split.train, c.battery), c.battery, c.constraints,
                                        c.distill, grid_of(o, c.probe_grid));
  const fs::path ckpt = o.out.empty() ? fs::path(c.paths.student) : fs::path(o.out);
  write_checkpoint(ckpt, r.checkpoint);
  std::cout << "wrote " << ckpt.string();
  if (r.last_probe) std::cout << " (layer-free probe violations " << r.last_probe->total_violations() << ")";
  std::cout << "\n";
  return 0;
}

int cmd_verify(const Options& o) {
  const RunConfig c = load_config(o, true);
  const StudentModel s = student_from_checkpoint(read_checkpoint(o.student.empty() ? c.paths.student : o.student));
  const GridSpec grid = grid_of(o, c.probe_grid);
  auto argmax_of = [](const std::vector<Probs>& p) {
    std::vector<Action> a(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) a[i] = argmax_action(p[i]);
    return a;
  };
  const ViolationReport with =
      verify_properties([&](std::span<const EnvState> st) { return argmax_of(s.with_layer(st)); }, grid, s.constraints);
  const ViolationReport free =
      verify_properties([&](std::span<const EnvState> st) { return argmax_of(s.layer_free(st)); }, grid, s.constraints);
  const nlohmann::json j{{"with_layer", with.to_json()}, {"layer_free", free.to_json()}};
  if (!o.out.empty()) open_out(o.out) << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return with.total_violations() == 0 ? 0 : 1;
}

int cmd_backtest(const Options& o) {
  const RunConfig c = load_config(o, true);
  const PriceSeries series = eval_series(o, c);
  const auto days = make_day_profiles(series, c.battery);
  nlohmann::json j = nlohmann::json::array();
  for (const Controller& ctl : make_controllers(o, c, series)) {
    const ProfitReport r = backtest(ctl, days, c.battery, c.eval.initial_soc, c.eval.carry_soc);
    nlohmann::json per_day = nlohmann::json::array();
    for (const auto& d : r.days) per_day.push_back({{"date", format_date(d.date)}, {"profit_eur", d.profit}, {"final_soc", d.final_soc}});
    j.push_back({{"controller", ctl.name},
                 {"total_profit_eur", r.total_profit},
                 {"day_count", r.day_count},
                 {"profit_eur_per_day_per_mwh", r.profit_per_day_per_mwh},
                 {"days", per_day}});
  }
  if (!o.out.empty()) open_out(o.out) << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const Options& o) {
  const RunConfig c = load_config(o, true);
  const PriceSeries series = eval_series(o, c);
  const auto controllers = make_controllers(o, c, series);
  const ComparisonTable t = compare_controllers(controllers, make_day_profiles(series, c.battery), c.battery,
                                                c.eval.initial_soc, c.eval.carry_soc);
  auto f = open_out(out_dir(o, c) / "comparison.csv");
  write_comparison_csv(f, t);
  write_comparison_csv(std::cout, t);
  return 0;
}

int cmd_heatmap(const Options& o) {
  const RunConfig c = load_config(o, true);
  PriceSeries none;
  const auto controllers = make_controllers(o, c, none);
  const GridSpec grid = grid_of(o, c.heatmap_grid);
  const fs::path dir = out_dir(o, c);
  for (const Controller& ctl : controllers) {
    const fs::path sub = controllers.size() == 1 ? dir : dir / fs::path(ctl.name).stem();
    for (const HeatmapTable& t : policy_heatmap(ctl, grid)) {
      auto f = open_out(sub / heatmap_file_name(t.context));
      write_heatmap_csv(f, t);
    }
  }
  std::cout << "wrote heatmaps to " << dir.string() << "\n";
  return 0;
}

int cmd_trace(const Options& o) {
  const RunConfig c = load_config(o, true);
  if (o.day.empty()) throw CLI::RequiredError("--day");
  const PriceSeries series = o.prices.empty() ? load_series(c.paths.prices) : load_series(o.prices);
  const auto controllers = make_controllers(o, c, series);
  if (controllers.size() != 1) throw Error(ErrorKind::kInvalidArgument, "trace takes exactly one controller");
  const auto rows = day_trace(controllers.front(), series, parse_date(o.day), c.battery, c.eval.initial_soc);
  auto f = open_out(out_dir(o, c) / ("trace_" + o.day + ".csv"));
  write_trace_csv(f, rows);
  double total = 0.0;
  for (const auto& r : rows) total += r.reward;
  std::cout << "wrote " << rows.size() << " steps, day profit " << total << " EUR\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery arbitrage on imbalance prices: training, policy correction and evaluation"};
  app.require_subcommand(0, 1);
  Options o;
  bool print_default = false;
  app.add_flag("--print-default-config", print_default, "Print the full default configuration and exit");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Override the configured seed");
    sub->add_option("--out", o.out, "Output file or directory");
  };
  auto* synth = app.add_subcommand("synth-prices", "Generate a synthetic price CSV");
  common(synth);
  auto* ingest = app.add_subcommand("ingest", "Validate a price CSV and write histogram.csv");
  common(ingest);
  ingest->add_option("--prices", o.prices, "Price CSV");
  auto* tr = app.add_subcommand("train", "Train a DQN or DDQN teacher");
  common(tr);
  tr->add_option("--agent", o.agent, "dqn or ddqn")->check(CLI::IsMember({"dqn", "ddqn"}));
  tr->add_option("--prices", o.prices, "Price CSV");
  auto* ds = app.add_subcommand("distill", "Distill a teacher into a corrected student");
  common(ds);
  ds->add_option("--teacher", o.teacher, "Teacher checkpoint");
  ds->add_option("--prices", o.prices, "Price CSV");
  ds->add_option("--grid", o.grid, "Probe grid JSON");
  auto* vf = app.add_subcommand("verify", "Check Properties 1-3 of a student on a grid");
  common(vf);
  vf->add_option("--student", o.student, "Student checkpoint");
  vf->add_option("--grid", o.grid, "Grid JSON");
  auto* bt = app.add_subcommand("backtest", "Greedy backtest of controllers");
  common(bt);
  bt->add_option("--controllers", o.controllers, "Comma list: rbc, idle, <ckpt>, <ckpt>:layer")->required();
  bt->add_option("--prices", o.prices, "Price CSV (default: test split of the configured prices)");
  auto* hm = app.add_subcommand("heatmap", "Greedy action over a (price, soc) grid");
  common(hm);
  hm->add_option("--controllers", o.controllers, "Comma list of controllers")->required();
  hm->add_option("--grid", o.grid, "Grid JSON");
  auto* cmp = app.add_subcommand("compare", "Profit comparison table");
  common(cmp);
  cmp->add_option("--controllers", o.controllers, "Comma list of controllers")->required();
  cmp->add_option("--prices", o.prices, "Price CSV (default: test split of the configured prices)");
  auto* tc = app.add_subcommand("trace", "Per-step trace of one day");
  common(tc);
  tc->add_option("--controllers", o.controllers, "One controller")->required();
  tc->add_option("--prices", o.prices, "Price CSV");
  tc->add_option("--day", o.day, "YYYY-MM-DD")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (print_default) {
      std::cout << dump_config(RunConfig{});
      return 0;
    }
    if (synth->parsed()) return cmd_synth(o);
    if (ingest->parsed()) return cmd_ingest(o);
    if (tr->parsed()) return cmd_train(o);
    if (ds->parsed()) return cmd_distill(o);
    if (vf->parsed()) return cmd_verify(o);
    if (bt->parsed()) return cmd_backtest(o);
    if (hm->parsed()) return cmd_heatmap(o);
    if (cmp->parsed()) return cmd_compare(o);
    if (tc->parsed()) return cmd_trace(o);
    std::cerr << app.help();
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
