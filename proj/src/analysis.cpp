#include "eleatt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "eleatt/bptt.hpp"
#include "eleatt/error.hpp"

namespace eleatt {

std::size_t block_param_count(CellKind kind, std::size_t input_dim, std::size_t hidden) {
  return gate_count(kind) * hidden * (input_dim + hidden + 1);
}

std::size_t gate_param_count(std::size_t input_dim, std::size_t hidden) {
  return input_dim * (input_dim + hidden + 1);
}

std::size_t fc_param_count(std::size_t hidden, std::size_t classes) { return classes * (hidden + 1); }

std::size_t block_flops(CellKind kind, std::size_t input_dim, std::size_t hidden) {
  const std::size_t d = input_dim, n = hidden;
  switch (kind) {
    case CellKind::srnn: return n * (2 * d + 2 * n);
    case CellKind::gru: return n * (6 * d + 6 * n + 5);
    case CellKind::lstm: return n * (8 * d + 8 * n + 4);
  }
  return 0;
}

std::size_t gate_multiplies(std::size_t input_dim, std::size_t hidden) {
  return input_dim * (input_dim + hidden + 1);
}

std::size_t gate_additions(std::size_t input_dim, std::size_t hidden) {
  return input_dim * (input_dim + hidden);
}

std::size_t fc_flops(std::size_t hidden, std::size_t classes) { return 2 * classes * hidden; }

std::size_t CostReport::total_params() const {
  std::size_t n = fc_params;
  for (const auto& l : layers) n += l.params();
  return n;
}

std::size_t CostReport::enumerated_total_params() const {
  std::size_t n = enumerated_fc_params;
  for (const auto& l : layers) n += l.enumerated_params;
  return n;
}

std::size_t CostReport::flops_per_step() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.flops();
  return n;
}

std::string CostReport::to_table() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-6s %-5s %5s %6s %6s %12s %12s %12s %12s %12s\n", "layer", "kind",
                "D", "N", "gated", "block", "gate", "formula", "enumerated", "flops/step");
  os << buf;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerCost& c = layers[l];
    std::snprintf(buf, sizeof buf, "%-6zu %-5s %5zu %6zu %6s %12zu %12zu %12zu %12zu %12zu\n", l,
                  std::string(to_string(c.kind)).c_str(), c.input_dim, c.hidden, c.gated ? "yes" : "no",
                  c.block_params, c.gate_params, c.params(), c.enumerated_params, c.flops());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %-5s %5s %6s %6s %12s %12s %12zu %12zu %12zu\n", "fc", "-", "-",
                "-", "-", "-", "-", fc_params, enumerated_fc_params, fc_flops);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-6s %-5s %5s %6s %6s %12s %12s %12zu %12zu %12zu\n", "total", "", "",
                "", "", "", "", total_params(), enumerated_total_params(), flops_per_step());
  os << buf;
  return os.str();
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& c : layers) {
    j["layers"].push_back({{"kind", std::string(to_string(c.kind))},
                           {"input_dim", c.input_dim},
                           {"hidden", c.hidden},
                           {"gated", c.gated},
                           {"block_params", c.block_params},
                           {"gate_params", c.gate_params},
                           {"params", c.params()},
                           {"enumerated_params", c.enumerated_params},
                           {"block_flops", c.block_flops},
                           {"gate_multiplies", c.gate_multiplies},
                           {"gate_additions", c.gate_additions},
                           {"flops", c.flops()}});
  }
  j["fc_params"] = fc_params;
  j["enumerated_fc_params"] = enumerated_fc_params;
  j["fc_flops_per_sequence"] = fc_flops;
  j["total_params"] = total_params();
  j["enumerated_total_params"] = enumerated_total_params();
  j["flops_per_step"] = flops_per_step();
  return j.dump(2);
}

CostReport count_params(const NetworkConfig& config) {
  config.validate();
  const Network zero(config);
  CostReport r;
  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    const LayerSpec& s = config.layers[l];
    const std::size_t d = config.layer_input_dim(l);
    LayerCost c;
    c.kind = s.kind;
    c.input_dim = d;
    c.hidden = s.hidden;
    c.gated = s.gated;
    c.block_params = block_param_count(s.kind, d, s.hidden);
    c.gate_params = s.gated ? gate_param_count(d, s.hidden) : 0;
    c.enumerated_params = zero.layer(l).parameter_count();
    c.block_flops = block_flops(s.kind, d, s.hidden);
    c.gate_multiplies = s.gated ? gate_multiplies(d, s.hidden) : 0;
    c.gate_additions = s.gated ? gate_additions(d, s.hidden) : 0;
    r.layers.push_back(c);
  }
  r.fc_params = fc_param_count(config.layers.back().hidden, config.num_classes);
  r.enumerated_fc_params = zero.params().fc_w.size() + zero.params().fc_b.size();
  r.fc_flops = fc_flops(config.layers.back().hidden, config.num_classes);
  return r;
}

CostReport count_flops(const NetworkConfig& config) { return count_params(config); }

AttentionTrace extract_attention(const Network& model, const SequenceBatch& batch,
                                 std::vector<std::size_t> layers) {
  if (!model.has_gated_layer()) throw ConfigError("extract_attention: model has no gated layer");
  if (layers.empty()) {
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      if (model.layer(l).gated()) layers.push_back(l);
    }
  }
  for (std::size_t l : layers) {
    if (l >= model.num_layers() || !model.layer(l).gated()) {
      throw ConfigError("extract_attention: layer " + std::to_string(l) + " has no gate");
    }
  }
  const ForwardPass pass = unroll_forward(model, batch, Mode::eval);
  AttentionTrace trace;
  trace.layers = layers;
  trace.lengths = pass.lengths;
  for (std::size_t l : layers) {
    std::vector<Tensor2> a, x;
    for (const StepTrace& st : pass.layers[l].steps) {
      a.push_back(st.a);
      x.push_back(st.x);
    }
    trace.responses.push_back(std::move(a));
    trace.inputs.push_back(std::move(x));
  }
  return trace;
}

RelativeAttention relative_attention(const AttentionTrace& trace, std::size_t trace_layer,
                                     StaticModulation mode) {
  if (trace_layer >= trace.layers.size()) throw ConfigError("relative_attention: no such traced layer");
  const auto& resp = trace.responses[trace_layer];
  const auto& inputs = trace.inputs[trace_layer];
  if (resp.empty()) throw ConfigError("relative_attention: empty trace");
  const std::size_t dims = resp[0].rows();
  const std::size_t batch = resp[0].cols();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  RelativeAttention out;
  out.layer = trace.layers[trace_layer];
  std::vector<double> before(dims, 0.0), after(dims, 0.0), mean_a(dims, 0.0);
  std::size_t frames = 0;
  for (std::size_t t = 0; t < resp.size(); ++t) {
    for (std::size_t j = 0; j < batch; ++j) {
      if (t >= trace.lengths[j]) continue;
      ++frames;
      for (std::size_t i = 0; i < dims; ++i) {
        const double x = inputs[t](i, j);
        const double a = resp[t](i, j);
        mean_a[i] += a;
        if (mode == StaticModulation::rms_ratio) {
          before[i] += x * x;
          after[i] += (a * x) * (a * x);
        } else {
          before[i] += std::abs(x);
          after[i] += std::abs(a * x);
        }
      }
    }
  }
  out.static_modulation.assign(dims, nan);
  for (std::size_t i = 0; i < dims; ++i) {
    if (mode == StaticModulation::mean_response) {
      out.static_modulation[i] = frames ? mean_a[i] / static_cast<double>(frames) : nan;
    } else if (before[i] > 0.0) {
      const double ratio = after[i] / before[i];
      out.static_modulation[i] = mode == StaticModulation::rms_ratio ? std::sqrt(ratio) : ratio;
    }
    if (!(out.static_modulation[i] > 0.0)) {
      out.static_modulation[i] = nan;
      out.undefined.push_back(i);
    }
  }

  out.element_mean.assign(dims, 0.0);
  std::vector<std::size_t> counts(dims, 0);
  for (std::size_t t = 0; t < resp.size(); ++t) {
    Tensor2 rel(dims, batch, nan);
    for (std::size_t j = 0; j < batch; ++j) {
      if (t >= trace.lengths[j]) continue;
      for (std::size_t i = 0; i < dims; ++i) {
        if (std::isnan(out.static_modulation[i])) continue;
        rel(i, j) = resp[t](i, j) / out.static_modulation[i];
        out.element_mean[i] += rel(i, j);
        ++counts[i];
      }
    }
    out.relative.push_back(std::move(rel));
  }
  for (std::size_t i = 0; i < dims; ++i) {
    out.element_mean[i] = counts[i] ? out.element_mean[i] / static_cast<double>(counts[i]) : nan;
  }
  if (dims % 3 == 0) {
    for (std::size_t j = 0; j < dims / 3; ++j) {
      out.joint_score.push_back(out.element_mean[3 * j] + out.element_mean[3 * j + 1] +
                                out.element_mean[3 * j + 2]);
    }
  }
  return out;
}

double mean_over(const RelativeAttention& rel, const std::vector<std::size_t>& elements) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i : elements) {
    if (i < rel.element_mean.size() && !std::isnan(rel.element_mean[i])) {
      s += rel.element_mean[i];
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::string attention_csv(const AttentionTrace& trace, const RelativeAttention& rel,
                          std::size_t trace_layer) {
  const auto& resp = trace.responses.at(trace_layer);
  std::string out = "sequence,t,element,a,relative\n";
  char buf[128];
  for (std::size_t j = 0; j < trace.lengths.size(); ++j) {
    for (std::size_t t = 0; t < trace.lengths[j]; ++t) {
      for (std::size_t i = 0; i < resp[t].rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.9g,%.9g\n", j, t, i, resp[t](i, j),
                      rel.relative[t](i, j));
        out += buf;
      }
    }
  }
  return out;
}

std::string attention_json(const RelativeAttention& rel) {
  auto clean = [](const std::vector<double>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (double x : v) {
      if (std::isnan(x)) a.push_back(nullptr);
      else a.push_back(x);
    }
    return a;
  };
  nlohmann::ordered_json j;
  j["layer"] = rel.layer;
  j["static_modulation"] = clean(rel.static_modulation);
  j["element_mean_relative"] = clean(rel.element_mean);
  j["joints"] = clean(rel.joint_score);
  j["undefined_elements"] = rel.undefined;
  return j.dump(2);
}

}  // namespace eleatt
