#include "edgecache/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace edgecache {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json parse(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument("malformed JSON document");
  return j;
}

void check_version(const json& j) {
  if (!j.is_object() || !j.contains("format_version") ||
      j.at("format_version").get<int>() != kFormatVersion) {
    throw std::invalid_argument("missing or unsupported format_version");
  }
}

json topology_fields(const Topology& t) {
  json j;
  j["format_version"] = kFormatVersion;
  j["nodes"] = t.num_nodes;
  json links = json::array();
  for (const Link& l : t.links) links.push_back({l.u, l.v});
  j["links"] = std::move(links);
  j["ar_ids"] = t.ar_ids;
  j["ec_ids"] = t.ec_ids;
  j["n_backhaul"] = t.n_backhaul;
  return j;
}

Topology topology_from_fields(const json& j) {
  std::vector<Link> links;
  for (const auto& pair : j.at("links")) {
    if (!pair.is_array() || pair.size() != 2) {
      throw std::invalid_argument("link entries must be [u, v] pairs");
    }
    links.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }
  return Topology::build(j.at("nodes").get<int>(), std::move(links),
                         j.at("ar_ids").get<std::vector<int>>(),
                         j.at("ec_ids").get<std::vector<int>>(),
                         j.at("n_backhaul").get<int>());
}

double finite_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string topology_to_json(const Topology& topology) {
  return topology_fields(topology).dump();
}

Topology topology_from_json(const std::string& text) {
  const json j = parse(text);
  check_version(j);
  return topology_from_fields(j);
}

std::string instance_to_json(const Instance& instance) {
  json j = topology_fields(instance.topology);
  json flows = json::array();
  for (const FlowDemand& f : instance.flows) {
    flows.push_back({{"s_mb", f.s_mb}, {"b_mbps", f.b_mbps}, {"p", f.p}});
  }
  j["flows"] = std::move(flows);
  j["w_mb"] = instance.ec_capacity_mb;
  j["c_mbps"] = instance.link_capacity_mbps;
  j["alpha"] = instance.alpha;
  j["beta"] = instance.beta;
  return j.dump();
}

Instance instance_from_json(const std::string& text) {
  const json j = parse(text);
  check_version(j);
  Instance inst;
  inst.topology = topology_from_fields(j);
  for (const auto& f : j.at("flows")) {
    FlowDemand d;
    d.s_mb = f.at("s_mb").get<double>();
    d.b_mbps = f.at("b_mbps").get<double>();
    d.p = f.at("p").get<std::vector<double>>();
    inst.flows.push_back(std::move(d));
  }
  inst.ec_capacity_mb = j.at("w_mb").get<std::vector<double>>();
  inst.link_capacity_mbps = j.at("c_mbps").get<std::vector<double>>();
  inst.alpha = j.at("alpha").get<double>();
  inst.beta = j.at("beta").get<double>();
  validate(inst);
  return inst;
}

namespace {

json assignment_matrix(const Instance& instance, const Assignment& assignment) {
  const int ne = instance.topology.num_ecs();
  json rows = json::array();
  for (int k = 0; k < assignment.num_flows(); ++k) {
    std::vector<int> row(ne, 0);
    if (assignment.ec_of_flow[k] != Assignment::kUnassigned) row[assignment.ec_of_flow[k]] = 1;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string solution_to_json(const Instance& instance, const Solution& solution) {
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();
  json j;
  j["format_version"] = kFormatVersion;
  j["x"] = assignment_matrix(instance, solution.assignment);
  json z = json::array();
  for (int k = 0; k < solution.routing.num_flows; ++k) {
    json per_ar = json::array();
    for (int a = 0; a < na; ++a) {
      std::vector<int> row(ne, 0);
      for (int e = 0; e < ne; ++e) row[e] = solution.routing.z_at(k, a, e);
      per_ar.push_back(row);
    }
    z.push_back(std::move(per_ar));
  }
  j["z"] = std::move(z);
  json y = json::array();
  for (int k = 0; k < solution.routing.num_flows; ++k) {
    std::vector<int> row(nl, 0);
    for (int l = 0; l < nl; ++l) row[l] = solution.routing.y_at(k, l);
    y.push_back(row);
  }
  j["y"] = std::move(y);
  j["objective"] = number_or_null(solution.objective);
  j["penalty_score"] = number_or_null(solution.penalty_score);
  j["feasible"] = solution.feasible;
  json violations = json::array();
  for (const Violation& v : check_feasibility(instance, solution)) {
    json item;
    item["code"] = v.code;
    if (v.flow >= 0) item["k"] = v.flow;
    if (v.ar >= 0) item["a"] = v.ar;
    if (v.ec >= 0) item["e"] = v.ec;
    if (v.link >= 0) item["l"] = v.link;
    violations.push_back(std::move(item));
  }
  j["violations"] = std::move(violations);
  return j.dump();
}

Solution solution_from_json(const Instance& instance, const std::string& text) {
  const json j = parse(text);
  check_version(j);
  const int nk = instance.num_flows();
  const int na = instance.topology.num_ars();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();

  Solution s;
  const json& x = j.at("x");
  if (static_cast<int>(x.size()) != nk) throw std::invalid_argument("x row count mismatch");
  s.assignment = Assignment::unassigned(nk);
  for (int k = 0; k < nk; ++k) {
    const auto row = x[k].get<std::vector<int>>();
    if (static_cast<int>(row.size()) != ne) throw std::invalid_argument("x row length mismatch");
    int ones = 0;
    for (int e = 0; e < ne; ++e) {
      if (row[e] == 1) {
        s.assignment.ec_of_flow[k] = e;
        ++ones;
      } else if (row[e] != 0) {
        throw std::invalid_argument("x entries must be 0 or 1");
      }
    }
    if (ones > 1) throw std::invalid_argument("x rows must have at most one nonzero entry");
  }
  s.routing = Routing::zeros(nk, na, ne, nl);
  const json& z = j.at("z");
  if (static_cast<int>(z.size()) != nk) throw std::invalid_argument("z flow count mismatch");
  for (int k = 0; k < nk; ++k) {
    if (static_cast<int>(z[k].size()) != na) throw std::invalid_argument("z AR count mismatch");
    for (int a = 0; a < na; ++a) {
      const auto row = z[k][a].get<std::vector<int>>();
      if (static_cast<int>(row.size()) != ne) throw std::invalid_argument("z row length mismatch");
      for (int e = 0; e < ne; ++e) s.routing.set_z(k, a, e, row[e] ? 1 : 0);
    }
  }
  const json& y = j.at("y");
  if (static_cast<int>(y.size()) != nk) throw std::invalid_argument("y flow count mismatch");
  for (int k = 0; k < nk; ++k) {
    const auto row = y[k].get<std::vector<int>>();
    if (static_cast<int>(row.size()) != nl) throw std::invalid_argument("y row length mismatch");
    for (int l = 0; l < nl; ++l) s.routing.set_y(k, l, row[l] ? 1 : 0);
  }
  s.objective = finite_or(j.at("objective"), std::numeric_limits<double>::infinity());
  s.penalty_score = finite_or(j.at("penalty_score"), std::numeric_limits<double>::infinity());
  s.feasible = j.at("feasible").get<bool>();
  return s;
}

std::string image_to_json(const FeatureImage& image) {
  json j;
  j["format_version"] = kFormatVersion;
  j["height"] = image.height;
  j["width"] = image.width;
  j["num_ars"] = image.num_ars;
  j["num_ecs"] = image.num_ecs;
  j["num_links"] = image.num_links;
  j["pixels"] = image.pixels;
  j["excluded_ecs"] = image.excluded_ecs;
  j["excluded_links"] = image.excluded_links;
  j["padded_rows"] = std::vector<int>(image.padded_rows.begin(), image.padded_rows.end());
  return j.dump();
}

FeatureImage image_from_json(const std::string& text) {
  const json j = parse(text);
  check_version(j);
  FeatureImage img;
  img.height = j.at("height").get<int>();
  img.width = j.at("width").get<int>();
  img.num_ars = j.at("num_ars").get<int>();
  img.num_ecs = j.at("num_ecs").get<int>();
  img.num_links = j.at("num_links").get<int>();
  img.pixels = j.at("pixels").get<std::vector<double>>();
  img.excluded_ecs = j.at("excluded_ecs").get<std::vector<int>>();
  img.excluded_links = j.at("excluded_links").get<std::vector<int>>();
  const auto padded = j.at("padded_rows").get<std::vector<int>>();
  img.padded_rows.assign(padded.begin(), padded.end());
  if (img.width != img.num_ars + img.num_ecs + img.num_links ||
      img.pixels.size() != static_cast<std::size_t>(img.height) * img.width ||
      img.padded_rows.size() != static_cast<std::size_t>(img.height)) {
    throw std::invalid_argument("inconsistent image dimensions");
  }
  return img;
}

namespace {

json train_config_fields(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["conv_layers"] = c.conv_layers;
  j["filters"] = c.filters;
  j["kernel_h"] = c.kernel_h;
  j["kernel_w"] = c.kernel_w;
  j["l2_lambda"] = c.l2_lambda;
  j["momentum"] = c.momentum;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_fields(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.conv_layers = j.at("conv_layers").get<int>();
  c.filters = j.at("filters").get<int>();
  c.kernel_h = j.at("kernel_h").get<int>();
  c.kernel_w = j.at("kernel_w").get<int>();
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json model_fields(const CnnModel& m) {
  json j;
  j["input_height"] = m.input_height;
  j["input_width"] = m.input_width;
  j["num_classes"] = m.num_classes;
  j["hyperparameters"] = train_config_fields(m.hyper);
  j["input_mean"] = {{"shape", {m.input_height, m.input_width}}, {"data", m.input_mean}};
  json layers = json::array();
  for (const ConvBlock& block : m.conv) {
    json conv;
    conv["type"] = "conv2d";
    conv["shape"] = {block.out_channels, block.in_channels, block.kernel_h, block.kernel_w};
    conv["weights"] = block.weights;
    layers.push_back(std::move(conv));
    json bn;
    bn["type"] = "batch_norm";
    bn["shape"] = {block.out_channels};
    bn["scale"] = block.bn_scale;
    bn["shift"] = block.bn_shift;
    bn["running_mean"] = block.bn_running_mean;
    bn["running_var"] = block.bn_running_var;
    bn["epsilon"] = block.bn_epsilon;
    layers.push_back(std::move(bn));
    layers.push_back({{"type", "relu"}});
  }
  json fc;
  fc["type"] = "dense";
  fc["shape"] = {m.num_classes,
                 static_cast<int>(m.fc_weights.size()) / std::max(1, m.num_classes)};
  fc["weights"] = m.fc_weights;
  fc["bias"] = m.fc_bias;
  layers.push_back(std::move(fc));
  layers.push_back({{"type", "softmax"}});
  j["layers"] = std::move(layers);
  return j;
}

CnnModel model_from_fields(const json& j) {
  CnnModel m;
  m.input_height = j.at("input_height").get<int>();
  m.input_width = j.at("input_width").get<int>();
  m.num_classes = j.at("num_classes").get<int>();
  m.hyper = train_config_from_fields(j.at("hyperparameters"));
  m.input_mean = j.at("input_mean").at("data").get<std::vector<double>>();
  ConvBlock pending;
  bool have_conv = false;
  for (const auto& layer : j.at("layers")) {
    const std::string type = layer.at("type").get<std::string>();
    if (type == "conv2d") {
      const auto shape = layer.at("shape").get<std::vector<int>>();
      if (shape.size() != 4) throw std::invalid_argument("conv2d shape must have 4 entries");
      pending = ConvBlock{};
      pending.out_channels = shape[0];
      pending.in_channels = shape[1];
      pending.kernel_h = shape[2];
      pending.kernel_w = shape[3];
      pending.weights = layer.at("weights").get<std::vector<double>>();
      have_conv = true;
    } else if (type == "batch_norm") {
      if (!have_conv) throw std::invalid_argument("batch_norm without preceding conv2d");
      pending.bn_scale = layer.at("scale").get<std::vector<double>>();
      pending.bn_shift = layer.at("shift").get<std::vector<double>>();
      pending.bn_running_mean = layer.at("running_mean").get<std::vector<double>>();
      pending.bn_running_var = layer.at("running_var").get<std::vector<double>>();
      pending.bn_epsilon = layer.at("epsilon").get<double>();
      for (double v : pending.bn_running_var) {
        if (!(v > 0)) throw std::invalid_argument("running variance must stay positive");
      }
      m.conv.push_back(pending);
      have_conv = false;
    } else if (type == "dense") {
      m.fc_weights = layer.at("weights").get<std::vector<double>>();
      m.fc_bias = layer.at("bias").get<std::vector<double>>();
    } else if (type != "relu" && type != "softmax") {
      throw std::invalid_argument("unknown layer type: " + type);
    }
  }
  if (m.conv.empty() || m.fc_weights.empty()) {
    throw std::invalid_argument("model must contain conv and dense layers");
  }
  return m;
}

}  // namespace

std::string models_to_json(const ModelEnsemble& models) {
  json j;
  j["format_version"] = kFormatVersion;
  json list = json::array();
  for (const CnnModel& m : models.flow_models) list.push_back(model_fields(m));
  j["flow_models"] = std::move(list);
  return j.dump();
}

ModelEnsemble models_from_json(const std::string& text) {
  const json j = parse(text);
  check_version(j);
  ModelEnsemble out;
  for (const auto& m : j.at("flow_models")) out.flow_models.push_back(model_from_fields(m));
  return out;
}

std::string mask_to_json(const CandidateMask& mask) {
  json j;
  j["format_version"] = kFormatVersion;
  json rows = json::array();
  for (int k = 0; k < mask.num_flows; ++k) {
    std::vector<int> row(mask.num_ecs);
    for (int e = 0; e < mask.num_ecs; ++e) row[e] = mask.allows(k, e) ? 1 : 0;
    rows.push_back(row);
  }
  j["mask"] = std::move(rows);
  j["repaired_rows"] = mask.repaired_rows;
  return j.dump();
}

CandidateMask mask_from_json(const std::string& text) {
  const json j = parse(text);
  check_version(j);
  const json& rows = j.at("mask");
  CandidateMask mask;
  mask.num_flows = static_cast<int>(rows.size());
  if (mask.num_flows == 0) throw std::invalid_argument("mask must have at least one row");
  mask.num_ecs = static_cast<int>(rows[0].size());
  mask.mask.assign(static_cast<std::size_t>(mask.num_flows) * mask.num_ecs, 0);
  for (int k = 0; k < mask.num_flows; ++k) {
    const auto row = rows[k].get<std::vector<int>>();
    if (static_cast<int>(row.size()) != mask.num_ecs) {
      throw std::invalid_argument("mask rows must have equal length");
    }
    for (int e = 0; e < mask.num_ecs; ++e) mask.mask[k * mask.num_ecs + e] = row[e] ? 1 : 0;
  }
  if (j.contains("repaired_rows")) {
    mask.repaired_rows = j.at("repaired_rows").get<std::vector<int>>();
  }
  return mask;
}

std::string outcome_to_json(const Instance& instance, const PolicyOutcome& outcome) {
  json j = parse(solution_to_json(instance, outcome.solution));
  json out;
  out["format_version"] = kFormatVersion;
  out["policy"] = policy_name(outcome.policy);
  out["solution"] = std::move(j);
  out["elapsed_ms"] = outcome.elapsed_ms;
  out["fallback_used"] = outcome.fallback_used;
  out["variable_count"] = outcome.variable_count;
  out["nodes_explored"] = outcome.nodes_explored;
  out["hcls_evaluations"] = outcome.hcls_evaluations;
  out["cascade_rounds"] = outcome.cascade_rounds;
  return out.dump();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace edgecache
