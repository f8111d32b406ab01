#include "imbal/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "imbal/error.hpp"

namespace imbal {

using nlohmann::json;

namespace {

// Reads present keys into fields and rejects anything unexpected.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j.is_object()) throw Error(ErrorKind::kParse, "config: section '" + section_ + "' must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw Error(ErrorKind::kParse, "config: unknown key '" + section_ + "." + key + "'");
  }
  template <typename T>
  Reader& operator()(const char* key, T& field) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        it->get_to(field);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kParse, "config: bad value for '" + section_ + "." + key + "': " + e.what());
      }
    }
    return *this;
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

void to_json(json& j, const BatteryParams& v) {
  j = json{{"capacity_mwh", v.capacity_mwh}, {"p_max_mw", v.p_max_mw},     {"eta_charge", v.eta_charge},
           {"eta_discharge", v.eta_discharge}, {"soc_min", v.soc_min},     {"soc_max", v.soc_max},
           {"step_minutes", v.step_minutes},   {"reward_includes_dt", v.reward_includes_dt},
           {"settle_commanded_power", v.settle_commanded_power}};
}
void from_json(const json& j, BatteryParams& v) {
  Reader(j, "battery")("capacity_mwh", v.capacity_mwh)("p_max_mw", v.p_max_mw)("eta_charge", v.eta_charge)(
      "eta_discharge", v.eta_discharge)("soc_min", v.soc_min)("soc_max", v.soc_max)("step_minutes", v.step_minutes)(
      "reward_includes_dt", v.reward_includes_dt)("settle_commanded_power", v.settle_commanded_power);
}

void to_json(json& j, const AtomGrid& v) {
  j = json{{"count", v.count}, {"v_min", v.v_min}, {"v_max", v.v_max}};
}
void from_json(const json& j, AtomGrid& v) { Reader(j, "atoms")("count", v.count)("v_min", v.v_min)("v_max", v.v_max); }

void to_json(json& j, const TrainConfig& v) {
  j = json{{"gamma", v.gamma},
           {"tau", v.tau},
           {"episodes", v.episodes},
           {"minibatch", v.minibatch},
           {"buffer_capacity", v.buffer_capacity},
           {"learning_rate", v.learning_rate},
           {"epsilon_start", v.epsilon_start},
           {"epsilon_end", v.epsilon_end},
           {"epsilon_anneal_fraction", v.epsilon_anneal_fraction},
           {"updates_per_step", v.updates_per_step},
           {"update_interval", v.update_interval},
           {"hidden_layers", v.hidden_layers},
           {"atoms", v.atoms},
           {"validation_interval", v.validation_interval},
           {"initial_soc", v.initial_soc},
           {"reward_scale", v.reward_scale},
           {"target_argmax_online", v.target_argmax_online}};
}
void from_json(const json& j, TrainConfig& v) {
  Reader(j, "train")("gamma", v.gamma)("tau", v.tau)("episodes", v.episodes)("minibatch", v.minibatch)(
      "buffer_capacity", v.buffer_capacity)("learning_rate", v.learning_rate)("epsilon_start", v.epsilon_start)(
      "epsilon_end", v.epsilon_end)("epsilon_anneal_fraction", v.epsilon_anneal_fraction)(
      "updates_per_step", v.updates_per_step)("update_interval", v.update_interval)("hidden_layers", v.hidden_layers)(
      "atoms", v.atoms)("validation_interval", v.validation_interval)("initial_soc", v.initial_soc)(
      "reward_scale", v.reward_scale)("target_argmax_online", v.target_argmax_online);
}

void to_json(json& j, const ConstraintConfig& v) {
  j = json{{"price_lower", v.price_lower}, {"price_upper", v.price_upper},       {"margin", v.margin},
           {"omega", v.omega},             {"kd_temperature", v.kd_temperature}, {"swap_kl", v.swap_kl}};
}
void from_json(const json& j, ConstraintConfig& v) {
  Reader(j, "constraints")("price_lower", v.price_lower)("price_upper", v.price_upper)("margin", v.margin)(
      "omega", v.omega)("kd_temperature", v.kd_temperature)("swap_kl", v.swap_kl);
}

void to_json(json& j, const DistillConfig& v) {
  j = json{{"epochs", v.epochs},
           {"learning_rate", v.learning_rate},
           {"hidden_layers", v.hidden_layers},
           {"batches_per_epoch", v.batches_per_epoch},
           {"trajectory_states", v.trajectory_states},
           {"lattice_prices", v.lattice_prices},
           {"lattice_socs", v.lattice_socs},
           {"lattice_price_min", v.lattice_price_min},
           {"lattice_price_max", v.lattice_price_max},
           {"lattice_soc_min", v.lattice_soc_min},
           {"lattice_soc_max", v.lattice_soc_max},
           {"violation_states", v.violation_states},
           {"probe_interval", v.probe_interval},
           {"initial_soc", v.initial_soc}};
}
void from_json(const json& j, DistillConfig& v) {
  Reader(j, "distill")("epochs", v.epochs)("learning_rate", v.learning_rate)("hidden_layers", v.hidden_layers)(
      "batches_per_epoch", v.batches_per_epoch)("trajectory_states", v.trajectory_states)(
      "lattice_prices", v.lattice_prices)("lattice_socs", v.lattice_socs)("lattice_price_min", v.lattice_price_min)(
      "lattice_price_max", v.lattice_price_max)("lattice_soc_min", v.lattice_soc_min)(
      "lattice_soc_max", v.lattice_soc_max)("violation_states", v.violation_states)(
      "probe_interval", v.probe_interval)("initial_soc", v.initial_soc);
}

void to_json(json& j, const CalendarContext& v) {
  j = json{{"minute_of_qh", v.minute_of_qh}, {"qh_of_day", v.qh_of_day}, {"month", v.month}};
}
void from_json(const json& j, CalendarContext& v) {
  Reader(j, "context")("minute_of_qh", v.minute_of_qh)("qh_of_day", v.qh_of_day)("month", v.month);
}

void to_json(json& j, const GridSpec& v) {
  j = json{{"price_min", v.price_min}, {"price_max", v.price_max}, {"price_step", v.price_step},
           {"soc_min", v.soc_min},     {"soc_max", v.soc_max},     {"soc_step", v.soc_step},
           {"contexts", v.contexts}};
}
void from_json(const json& j, GridSpec& v) {
  Reader(j, "grid")("price_min", v.price_min)("price_max", v.price_max)("price_step", v.price_step)(
      "soc_min", v.soc_min)("soc_max", v.soc_max)("soc_step", v.soc_step)("contexts", v.contexts);
}

void to_json(json& j, const SynthConfig& v) {
  j = json{{"days", v.days},
           {"start_date", format_date(v.start_date)},
           {"level", v.level},
           {"reversion_rate", v.reversion_rate},
           {"noise_scale", v.noise_scale},
           {"daily_amplitude", v.daily_amplitude},
           {"spike_probability", v.spike_probability},
           {"spike_min", v.spike_min},
           {"spike_max", v.spike_max}};
}
void from_json(const json& j, SynthConfig& v) {
  std::string start = format_date(v.start_date);
  Reader(j, "synth")("days", v.days)("start_date", start)("level", v.level)("reversion_rate", v.reversion_rate)(
      "noise_scale", v.noise_scale)("daily_amplitude", v.daily_amplitude)("spike_probability", v.spike_probability)(
      "spike_min", v.spike_min)("spike_max", v.spike_max);
  v.start_date = parse_date(start);
}

void to_json(json& j, const EvalConfig& v) {
  j = json{{"initial_soc", v.initial_soc}, {"carry_soc", v.carry_soc}, {"histogram_bin_width", v.histogram_bin_width}};
}
void from_json(const json& j, EvalConfig& v) {
  Reader(j, "eval")("initial_soc", v.initial_soc)("carry_soc", v.carry_soc)("histogram_bin_width",
                                                                              v.histogram_bin_width);
}

void to_json(json& j, const PathsConfig& v) {
  j = json{{"prices", v.prices}, {"out_dir", v.out_dir}, {"teacher", v.teacher}, {"student", v.student}};
}
void from_json(const json& j, PathsConfig& v) {
  Reader(j, "paths")("prices", v.prices)("out_dir", v.out_dir)("teacher", v.teacher)("student", v.student);
}

void to_json(json& j, const RunConfig& v) {
  j = json{{"seed", v.seed},
           {"agent", to_string(v.agent)},
           {"battery", v.battery},
           {"train", v.train},
           {"constraints", v.constraints},
           {"distill", v.distill},
           {"probe_grid", v.probe_grid},
           {"heatmap_grid", v.heatmap_grid},
           {"synth", v.synth},
           {"eval", v.eval},
           {"paths", v.paths}};
}
void from_json(const json& j, RunConfig& v) {
  std::string agent = to_string(v.agent);
  Reader(j, "")("seed", v.seed)("agent", agent)("battery", v.battery)("train", v.train)(
      "constraints", v.constraints)("distill", v.distill)("probe_grid", v.probe_grid)(
      "heatmap_grid", v.heatmap_grid)("synth", v.synth)("eval", v.eval)("paths", v.paths);
  v.agent = agent_kind_from_string(agent);
}

void RunConfig::validate() const {
  battery.validate();
  train.validate();
  constraints.validate();
  distill.validate();
  probe_grid.validate();
  heatmap_grid.validate();
  if (synth.days <= 0) throw Error(ErrorKind::kInvalidArgument, "synth.days must be positive");
  if (eval.initial_soc < battery.soc_min || eval.initial_soc > battery.soc_max)
    throw Error(ErrorKind::kInvalidArgument, "eval.initial_soc outside [soc_min, soc_max]");
  if (!(eval.histogram_bin_width > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "eval.histogram_bin_width must be positive");
}

std::string dump_config(const RunConfig& config) { return json(config).dump(2) + "\n"; }

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("config: ") + e.what());
  }
  RunConfig config = j.get<RunConfig>();
  config.validate();
  return config;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace imbal
