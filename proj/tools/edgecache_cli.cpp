// Command-line front end; drives everything through the shared-library C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgecache.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { ec_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

[[noreturn]] void fail(const std::string& context, ec_status rc) {
  std::cerr << "error: " << context << ": " << ec_last_error() << " (status " << rc << ")\n";
  std::exit(1);
}

void check(ec_status rc, const std::string& context) {
  if (rc != EC_OK) fail(context, rc);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    std::exit(1);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(1);
  }
  out << text;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("EDGECACHE_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 1;
}

// Shared flag values; config-file keys (JSON, same names as the long flags
// without dashes) provide defaults that explicit flags override.
struct Options {
  std::uint64_t seed = default_seed();
  int flows = 5;
  int count = 384;
  int val_count = -1;   // default: count / 6
  int test_count = -1;  // default: count / 6
  std::string policy = "benchmark";
  double delta = 0.001;
  double gamma = 100.0;
  double alpha = 1.0;
  double beta = 1.0;
  int jobs = 1;
  std::string out;
  std::string instance_path;
  std::string models_path;
  std::string data_dir;
  std::string mask_path;
  double big_m = 1e3;
  int ars = 7;
  int ecs = 6;
  int links = 20;
  int routers = 5;
  int n_backhaul = 12;
  int eval_count = 32;
  std::vector<int> eval_flows = {5};
  // training
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int conv_layers = 1;
  int filters = 16;
  int kernel = 3;
  double l2_lambda = 1e-4;
  double momentum = 0.9;
};

// Applies config-file values (keys = long flag names without dashes) to
// every option of the active subcommand that was not given explicitly.
class ConfigMerge {
 public:
  ConfigMerge(CLI::App* active, const std::string& path)
      : active_(active), cfg_(json::parse(read_text(path))) {}

  template <typename T>
  void set(const char* key, T& var) {
    if (!cfg_.contains(key)) return;
    CLI::Option* o = active_->get_option_no_throw(std::string("--") + key);
    if (!o || o->count() > 0) return;
    cfg_.at(key).get_to(var);
  }

 private:
  CLI::App* active_;
  json cfg_;
};

void log_resolved(const std::string& command, const json& fields) {
  json j = fields;
  j["command"] = command;
  std::cerr << "config: " << j.dump() << "\n";
}

ec_models* load_models(const std::string& path) {
  ec_models* models = nullptr;
  check(ec_models_from_json(read_text(path).c_str(), &models), "parse models " + path);
  return models;
}

ec_instance* load_instance(const std::string& path) {
  ec_instance* inst = nullptr;
  check(ec_instance_from_json(read_text(path).c_str(), &inst), "parse instance " + path);
  return inst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proactive edge-caching placement toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", opt.seed, "deterministic seed (env EDGECACHE_SEED fallback)");
    cmd->add_option("--jobs", opt.jobs, "worker threads for independent instances");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a solved, labeled dataset");
  add_common(gen);
  gen->add_option("--flows", opt.flows, "flows per instance")->check(CLI::PositiveNumber);
  gen->add_option("--count", opt.count, "total instances")->check(CLI::PositiveNumber);
  gen->add_option("--val-count", opt.val_count, "validation split size (default count/6)");
  gen->add_option("--test-count", opt.test_count, "test split size (default count/6)");
  gen->add_option("--alpha", opt.alpha, "caching cost weight");
  gen->add_option("--beta", opt.beta, "transmission cost weight");
  gen->add_option("--ars", opt.ars, "access routers");
  gen->add_option("--ecs", opt.ecs, "edge clouds");
  gen->add_option("--links", opt.links, "links");
  gen->add_option("--routers", opt.routers, "general routers");
  gen->add_option("--n-backhaul", opt.n_backhaul, "hops to the data center");
  gen->add_option("--out", opt.out, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train the per-flow classifier ensemble");
  add_common(train);
  train->add_option("--data", opt.data_dir, "dataset directory")->required();
  train->add_option("--out", opt.out, "output directory (models.json, loss_curve.csv)")
      ->required();
  train->add_option("--epochs", opt.epochs, "training epochs");
  train->add_option("--batch-size", opt.batch_size, "mini-batch size");
  train->add_option("--learning-rate", opt.learning_rate, "learning rate");
  train->add_option("--conv-layers", opt.conv_layers, "conv block depth (1..4)");
  train->add_option("--filters", opt.filters, "conv filters");
  train->add_option("--kernel", opt.kernel, "conv kernel side (odd)");
  train->add_option("--l2-lambda", opt.l2_lambda, "L2 regularization factor");
  train->add_option("--momentum", opt.momentum, "SGD momentum");

  CLI::App* solve = app.add_subcommand("solve", "solve one stored instance under a policy");
  add_common(solve);
  solve->add_option("--instance", opt.instance_path, "instance JSON file")->required();
  solve
      ->add_option("--policy", opt.policy,
                   "benchmark | pure-cnn | cnn-rmilp | cnn-hcls | gca")
      ->check(CLI::IsMember({"benchmark", "pure-cnn", "cnn-rmilp", "cnn-hcls", "gca"}));
  solve->add_option("--models", opt.models_path, "models JSON (cnn policies)");
  solve->add_option("--delta", opt.delta, "candidate threshold");
  solve->add_option("--gamma", opt.gamma, "penalty factor");
  solve->add_option("--out", opt.out, "write outcome JSON here instead of stdout");

  CLI::App* eval = app.add_subcommand("eval", "run the five-policy comparison");
  add_common(eval);
  eval->add_option("--data", opt.data_dir, "dataset directory")->required();
  eval->add_option("--models", opt.models_path, "models JSON")->required();
  eval->add_option("--flows", opt.eval_flows, "flow counts to evaluate");
  eval->add_option("--count", opt.eval_count, "test instances per extra flow count");
  eval->add_option("--delta", opt.delta, "candidate threshold");
  eval->add_option("--gamma", opt.gamma, "penalty factor");
  eval->add_option("--out", opt.out, "output directory (comparison.csv, comparison.txt)");

  CLI::App* milp = app.add_subcommand("export-milp", "write the linearized model as LP text");
  add_common(milp);
  milp->add_option("--instance", opt.instance_path, "instance JSON file")->required();
  milp->add_option("--mask", opt.mask_path, "candidate mask JSON file");
  milp->add_option("--big-m", opt.big_m, "linearization big-M");
  milp->add_option("--out", opt.out, "write LP here instead of stdout");

  CLI::App* render = app.add_subcommand("render", "render the feature image as binary PGM");
  add_common(render);
  render->add_option("--instance", opt.instance_path, "instance JSON file")->required();
  render->add_option("--out", opt.out, "output PGM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (!config_path.empty()) {
    CLI::App* active = app.get_subcommands().front();
    try {
      ConfigMerge merge(active, config_path);
      merge.set("seed", opt.seed);
      merge.set("jobs", opt.jobs);
      merge.set("val-count", opt.val_count);
      merge.set("test-count", opt.test_count);
      merge.set("alpha", opt.alpha);
      merge.set("beta", opt.beta);
      merge.set("ars", opt.ars);
      merge.set("ecs", opt.ecs);
      merge.set("links", opt.links);
      merge.set("routers", opt.routers);
      merge.set("n-backhaul", opt.n_backhaul);
      merge.set("out", opt.out);
      merge.set("data", opt.data_dir);
      merge.set("models", opt.models_path);
      merge.set("instance", opt.instance_path);
      merge.set("mask", opt.mask_path);
      merge.set("policy", opt.policy);
      merge.set("delta", opt.delta);
      merge.set("gamma", opt.gamma);
      merge.set("big-m", opt.big_m);
      merge.set("epochs", opt.epochs);
      merge.set("batch-size", opt.batch_size);
      merge.set("learning-rate", opt.learning_rate);
      merge.set("conv-layers", opt.conv_layers);
      merge.set("filters", opt.filters);
      merge.set("kernel", opt.kernel);
      merge.set("l2-lambda", opt.l2_lambda);
      merge.set("momentum", opt.momentum);
      if (eval->parsed()) {
        merge.set("flows", opt.eval_flows);
        merge.set("count", opt.eval_count);
      } else {
        merge.set("flows", opt.flows);
        merge.set("count", opt.count);
      }
    } catch (const std::exception& e) {
      std::cerr << "error: config file: " << e.what() << "\n";
      return 1;
    }
  }

  if (gen->parsed()) {
    const int val = opt.val_count >= 0 ? opt.val_count : opt.count / 6;
    const int test = opt.test_count >= 0 ? opt.test_count : opt.count / 6;
    const int train_count = opt.count - val - test;
    if (train_count < 1) {
      std::cerr << "error: split leaves no training instances\n";
      return 1;
    }
    log_resolved("gen", {{"seed", opt.seed},
                         {"flows", opt.flows},
                         {"train", train_count},
                         {"val", val},
                         {"test", test},
                         {"alpha", opt.alpha},
                         {"beta", opt.beta},
                         {"ars", opt.ars},
                         {"ecs", opt.ecs},
                         {"links", opt.links},
                         {"routers", opt.routers},
                         {"n_backhaul", opt.n_backhaul},
                         {"jobs", opt.jobs},
                         {"out", opt.out}});
    ec_topology* topo = nullptr;
    check(ec_topology_generate(opt.seed, opt.ars, opt.ecs, opt.links, opt.routers,
                               opt.n_backhaul, &topo),
          "generate topology");
    const ec_status rc =
        ec_dataset_build(topo, opt.seed, opt.flows, train_count, val, test, opt.alpha, opt.beta,
                         opt.jobs, opt.out.c_str());
    ec_topology_free(topo);
    check(rc, "build dataset");
    std::cout << "dataset written to " << opt.out << "\n";
    return 0;
  }

  if (train->parsed()) {
    log_resolved("train", {{"seed", opt.seed},
                           {"data", opt.data_dir},
                           {"epochs", opt.epochs},
                           {"batch_size", opt.batch_size},
                           {"learning_rate", opt.learning_rate},
                           {"conv_layers", opt.conv_layers},
                           {"filters", opt.filters},
                           {"kernel", opt.kernel},
                           {"l2_lambda", opt.l2_lambda},
                           {"momentum", opt.momentum},
                           {"jobs", opt.jobs},
                           {"out", opt.out}});
    ec_train_options topt;
    ec_train_options_init(&topt);
    topt.epochs = opt.epochs;
    topt.batch_size = opt.batch_size;
    topt.learning_rate = opt.learning_rate;
    topt.conv_layers = opt.conv_layers;
    topt.filters = opt.filters;
    topt.kernel_h = opt.kernel;
    topt.kernel_w = opt.kernel;
    topt.l2_lambda = opt.l2_lambda;
    topt.momentum = opt.momentum;
    topt.seed = opt.seed;
    topt.jobs = opt.jobs;
    OwnedString models, loss_csv;
    check(ec_train_dataset(opt.data_dir.c_str(), &topt, &models.ptr, &loss_csv.ptr), "train");
    fs::create_directories(opt.out);
    write_text((fs::path(opt.out) / "models.json").string(), models.str());
    write_text((fs::path(opt.out) / "loss_curve.csv").string(), loss_csv.str());
    std::cout << "models written to " << opt.out << "\n";
    return 0;
  }

  if (solve->parsed()) {
    log_resolved("solve", {{"seed", opt.seed},
                           {"instance", opt.instance_path},
                           {"policy", opt.policy},
                           {"delta", opt.delta},
                           {"gamma", opt.gamma}});
    ec_instance* inst = load_instance(opt.instance_path);
    ec_models* models = nullptr;
    if (!opt.models_path.empty()) models = load_models(opt.models_path);
    OwnedString outcome;
    const ec_status rc =
        ec_solve(inst, opt.policy.c_str(), models, opt.delta, opt.gamma, &outcome.ptr);
    ec_instance_free(inst);
    ec_models_free(models);
    check(rc, "solve");
    if (opt.out.empty()) {
      std::cout << outcome.str() << "\n";
    } else {
      write_text(opt.out, outcome.str() + "\n");
    }
    return 0;
  }

  if (eval->parsed()) {
    log_resolved("eval", {{"seed", opt.seed},
                          {"data", opt.data_dir},
                          {"models", opt.models_path},
                          {"flows", opt.eval_flows},
                          {"count", opt.eval_count},
                          {"delta", opt.delta},
                          {"gamma", opt.gamma},
                          {"jobs", opt.jobs}});
    ec_models* models = load_models(opt.models_path);
    std::vector<int32_t> flows(opt.eval_flows.begin(), opt.eval_flows.end());
    OwnedString csv, table;
    double min_ratio = 0.0;
    const ec_status rc = ec_evaluate(opt.data_dir.c_str(), models, opt.seed, flows.data(),
                                     static_cast<int32_t>(flows.size()), opt.eval_count,
                                     opt.delta, opt.gamma, opt.jobs, &csv.ptr, &table.ptr,
                                     &min_ratio);
    ec_models_free(models);
    check(rc, "evaluate");
    std::cout << table.str();
    if (!opt.out.empty()) {
      fs::create_directories(opt.out);
      write_text((fs::path(opt.out) / "comparison.csv").string(), csv.str());
      write_text((fs::path(opt.out) / "comparison.txt").string(), table.str());
    }
    if (min_ratio < 1.0) {
      std::cerr << "error: benchmark feasible ratio below 100%\n";
      return 1;
    }
    return 0;
  }

  if (milp->parsed()) {
    log_resolved("export-milp", {{"instance", opt.instance_path},
                                 {"mask", opt.mask_path},
                                 {"big_m", opt.big_m}});
    ec_instance* inst = load_instance(opt.instance_path);
    OwnedString lp;
    std::string mask_text;
    const char* mask_ptr = nullptr;
    if (!opt.mask_path.empty()) {
      mask_text = read_text(opt.mask_path);
      mask_ptr = mask_text.c_str();
    }
    const ec_status rc = ec_export_milp(inst, mask_ptr, opt.big_m, &lp.ptr);
    ec_instance_free(inst);
    check(rc, "export-milp");
    if (opt.out.empty()) {
      std::cout << lp.str();
    } else {
      write_text(opt.out, lp.str());
    }
    return 0;
  }

  if (render->parsed()) {
    log_resolved("render", {{"instance", opt.instance_path}, {"out", opt.out}});
    ec_instance* inst = load_instance(opt.instance_path);
    uint8_t* bytes = nullptr;
    size_t size = 0;
    const ec_status rc = ec_render_pgm(inst, &bytes, &size);
    ec_instance_free(inst);
    check(rc, "render");
    std::ofstream out(opt.out, std::ios::binary);
    if (!out) {
      ec_buffer_free(bytes);
      std::cerr << "error: cannot write " << opt.out << "\n";
      return 1;
    }
    out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(size));
    ec_buffer_free(bytes);
    std::cout << "image written to " << opt.out << "\n";
    return 0;
  }

  return 0;
}
