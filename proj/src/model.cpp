// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#include "vared/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "vared/jsonutil.hpp"
#include "vared/nn.hpp"

namespace vared {

namespace {

Json triple(int64_t a, int64_t b, int64_t c) { return Json::array({a, b, c}); }

std::array<int64_t, 3> read_triple(const Json& j, const std::string& ctx,
                                   const std::string& key) {
  const auto v = require<std::vector<int64_t>>(j, ctx, key);
  if (v.size() != 3) fail(ErrorKind::Config, ctx, ": '", key, "' must have 3 entries");
  return {v[0], v[1], v[2]};
}

int64_t out_len(int64_t in, int64_t k, int64_t s, int64_t p) {
  return (in + 2 * p - k) / s + 1;
}

// Validates the layer chain and derives per-layer spatial/temporal shapes.
// Works for cost-only specs too (no parameters involved).
std::vector<LayerShape> chain_shapes(const ModelSpec& spec) {
  if (spec.input_dims.size() != 4)
    fail(ErrorKind::Config, "model '", spec.arch, "': input_dims must be [C,T,H,W]");
  if (spec.layers.empty()) fail(ErrorKind::Config, "model '", spec.arch, "': no layers");
  std::vector<LayerShape> shapes;
  int64_t c = spec.input_dims[0], t = spec.input_dims[1];
  int64_t h = spec.input_dims[2], w = spec.input_dims[3];
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const DynamicConvConfig& cv = ls.conv;
    int64_t ci = c, ti = t, hi = h, wi = w;
    if (ls.input_layer >= 0) {
      if (!spec.cost_only)
        fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l,
             " ('", cv.name, "'): shortcut inputs are only allowed in cost-only specs");
      if (ls.input_layer >= static_cast<int>(l))
        fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l,
             " references input of later layer ", ls.input_layer);
      const LayerShape& src = shapes[static_cast<size_t>(ls.input_layer)];
      ci = spec.layers[static_cast<size_t>(ls.input_layer)].conv.c_in;
      ti = src.t_in;
      hi = src.h_in;
      wi = src.w_in;
    }
    if (cv.c_in != ci)
      fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l, " ('", cv.name,
           "') expects C_in ", cv.c_in, " but receives ", ci);
    LayerShape sh;
    sh.t_in = ti;
    sh.h_in = hi;
    sh.w_in = wi;
    sh.t_out = out_len(ti, cv.k_t, cv.stride.t, cv.pad.t);
    sh.h_out = out_len(hi, cv.k_h, cv.stride.h, cv.pad.h);
    sh.w_out = out_len(wi, cv.k_w, cv.stride.w, cv.pad.w);
    if (sh.t_out < 1 || sh.h_out < 1 || sh.w_out < 1)
      fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l, " ('", cv.name,
           "') collapses to an empty output");
    if (ls.dynamic) {
      validate_dynamic_config<float>(cv);
      for (int j = 2; j <= static_cast<int>(cv.s_t); ++j) {
        const int64_t r = int64_t{1} << (j - 1);
        if (sh.t_out % r != 0)
          fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l, " ('", cv.name,
               "'): T_o = ", sh.t_out, " not divisible by 2^{S_t-1} branch factor ", r);
        if (out_len(ti, cv.k_t, cv.stride.t * r, cv.pad.t) != sh.t_out / r)
          fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l, " ('", cv.name,
               "'): strided temporal branch R=", r, " breaks the frame-count contract");
      }
      validate_cheap_budget(cv, ti, hi, wi);
      const LayerCostSpec cs = dynamic_conv_cost_spec(cv, ti, hi, wi);
      const double g = gate_flops(cv.c_in, ti, spec.gate_d_h, cv.s_t + cv.s_c);
      if (g >= 0.01 * conv_flops(cs))
        fail(ErrorKind::Config, "model '", spec.arch, "': layer ", l, " ('", cv.name,
             "'): gate cost ", g, " is not below 1% of the layer's ", conv_flops(cs),
             " FLOPs");
    }
    if (ls.input_layer < 0) {
      c = cv.c_out;
      t = sh.t_out;
      h = sh.h_out;
      w = sh.w_out;
    }
    shapes.push_back(sh);
  }
  return shapes;
}

double spec_static_flops(const ModelSpec& spec, const std::vector<LayerShape>& shapes) {
  double total = 0.0;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const DynamicConvConfig& cv = spec.layers[l].conv;
    LayerCostSpec cs = dynamic_conv_cost_spec(cv, shapes[l].t_in, shapes[l].h_in, shapes[l].w_in);
    total += conv_flops(cs);
  }
  if (spec.head_fc) {
    int64_t c_last = spec.input_dims[0];
    for (const LayerSpec& ls : spec.layers)
      if (ls.input_layer < 0) c_last = ls.conv.c_out;
    total += static_cast<double>(c_last) * spec.num_classes;
  }
  return total;
}

std::string pname(const std::string& layer, const std::string& leafname) {
  return layer + "." + leafname;
}

// Runtime view of one layer with tensors bound either to a tape (training)
// or straight to the master storage (inference).
struct BoundLayer {
  const LayerSpec* sp = nullptr;
  DynamicConvParams p;
  GateParams gate;
};

Tensor bind_param(Tape* tape, ParamStore& store, const std::string& name) {
  Tensor& t = store.at(name);
  return tape ? tape->leaf(t, name) : t;
}

std::vector<BoundLayer> bind_layers(Model& m, Tape* tape) {
  std::vector<BoundLayer> out;
  for (const LayerSpec& ls : m.spec.layers) {
    BoundLayer bl;
    bl.sp = &ls;
    bl.p.cfg = ls.conv;
    const std::string& n = ls.conv.name;
    bl.p.w = bind_param(tape, m.store, pname(n, "w"));
    if (ls.conv.bias) bl.p.b = bind_param(tape, m.store, pname(n, "b"));
    if (ls.dynamic) {
      const int64_t offsets = (int64_t{1} << (ls.conv.s_t - 1)) - 1;
      for (int64_t j = 1; j <= offsets; ++j) {
        CheapOpT<float> op;
        op.kind = ls.conv.cheap_temporal;
        if (op.kind != CheapKind::Identity)
          op.weights = bind_param(tape, m.store, pname(n, "cheap_t" + std::to_string(j) + ".w"));
        bl.p.cheap_t.push_back(std::move(op));
      }
      bl.p.cheap_c.kind = ls.conv.cheap_channel;
      if (ls.conv.cheap_channel != CheapKind::Identity)
        bl.p.cheap_c.weights = bind_param(tape, m.store, pname(n, "cheap_c.w"));
      bl.gate.d_h = m.spec.gate_d_h;
      bl.gate.s_t = ls.conv.s_t;
      bl.gate.s_c = ls.conv.s_c;
      bl.gate.w1 = bind_param(tape, m.store, pname(n, "gate.w1"));
      bl.gate.w2 = bind_param(tape, m.store, pname(n, "gate.w2"));
      bl.gate.beta = bind_param(tape, m.store, pname(n, "gate.beta"));
      bl.gate.bn_gamma = bind_param(tape, m.store, pname(n, "gate.bn_gamma"));
      bl.gate.bn_beta = bind_param(tape, m.store, pname(n, "gate.bn_beta"));
      // Running stats share storage with the store but never join the tape.
      bl.gate.bn.running_mean = m.store.at(pname(n, "gate.bn_mean"));
      bl.gate.bn.running_var = m.store.at(pname(n, "gate.bn_var"));
    }
    out.push_back(std::move(bl));
  }
  return out;
}

}  // namespace

Json ModelSpec::to_json() const {
  Json j;
  j["config_version"] = 1;
  j["arch"] = arch;
  j["input_dims"] = input_dims;
  j["num_classes"] = num_classes;
  j["head_fc"] = head_fc;
  j["cost_only"] = cost_only;
  j["gate_d_h"] = gate_d_h;
  j["layers"] = Json::array();
  for (const LayerSpec& ls : layers) {
    Json e;
    e["name"] = ls.conv.name;
    e["c_in"] = ls.conv.c_in;
    e["c_out"] = ls.conv.c_out;
    e["kernel"] = triple(ls.conv.k_t, ls.conv.k_h, ls.conv.k_w);
    e["stride"] = triple(ls.conv.stride.t, ls.conv.stride.h, ls.conv.stride.w);
    e["pad"] = triple(ls.conv.pad.t, ls.conv.pad.h, ls.conv.pad.w);
    e["bias"] = ls.conv.bias;
    e["dynamic"] = ls.dynamic;
    e["s_t"] = ls.conv.s_t;
    e["s_c"] = ls.conv.s_c;
    e["cheap_temporal"] = cheap_kind_name(ls.conv.cheap_temporal);
    e["cheap_channel"] = cheap_kind_name(ls.conv.cheap_channel);
    e["input_layer"] = ls.input_layer;
    j["layers"].push_back(std::move(e));
  }
  return j;
}

ModelSpec ModelSpec::from_json(const Json& j) {
  const std::string ctx = "model spec";
  expect_keys(j, ctx,
              {"config_version", "arch", "input_dims", "num_classes", "head_fc", "cost_only",
               "gate_d_h", "layers"});
  require_config_version(j, ctx);
  ModelSpec s;
  s.arch = require<std::string>(j, ctx, "arch");
  s.input_dims = require<std::vector<int64_t>>(j, ctx, "input_dims");
  s.num_classes = require<int>(j, ctx, "num_classes");
  s.head_fc = optional<bool>(j, ctx, "head_fc", true);
  s.cost_only = optional<bool>(j, ctx, "cost_only", false);
  s.gate_d_h = optional<int64_t>(j, ctx, "gate_d_h", 16);
  if (!j.contains("layers") || !j.at("layers").is_array() || j.at("layers").empty())
    fail(ErrorKind::Config, ctx, ": 'layers' must be a non-empty array");
  for (const Json& e : j.at("layers")) {
    const std::string lctx = ctx + ".layers[]";
    expect_keys(e, lctx,
                {"name", "c_in", "c_out", "kernel", "stride", "pad", "bias", "dynamic", "s_t",
                 "s_c", "cheap_temporal", "cheap_channel", "input_layer"});
    LayerSpec ls;
    ls.conv.name = require<std::string>(e, lctx, "name");
    ls.conv.c_in = require<int64_t>(e, lctx, "c_in");
    ls.conv.c_out = require<int64_t>(e, lctx, "c_out");
    const auto k = read_triple(e, lctx, "kernel");
    const auto st = read_triple(e, lctx, "stride");
    const auto pd = read_triple(e, lctx, "pad");
    ls.conv.k_t = k[0];
    ls.conv.k_h = k[1];
    ls.conv.k_w = k[2];
    ls.conv.stride = {st[0], st[1], st[2]};
    ls.conv.pad = {pd[0], pd[1], pd[2]};
    ls.conv.bias = optional<bool>(e, lctx, "bias", true);
    ls.dynamic = optional<bool>(e, lctx, "dynamic", false);
    ls.conv.s_t = optional<int64_t>(e, lctx, "s_t", 2);
    ls.conv.s_c = optional<int64_t>(e, lctx, "s_c", 2);
    ls.conv.cheap_temporal =
        cheap_kind_from_name(optional<std::string>(e, lctx, "cheap_temporal", "depthwise_spatial"));
    ls.conv.cheap_channel =
        cheap_kind_from_name(optional<std::string>(e, lctx, "cheap_channel", "depthwise_spatial"));
    ls.input_layer = optional<int>(e, lctx, "input_layer", -1);
    s.layers.push_back(std::move(ls));
  }
  return s;
}

Model build_model(const ModelSpec& spec, uint64_t seed) {
  if (spec.cost_only)
    fail(ErrorKind::Config, "model '", spec.arch, "' is cost-only and cannot be built");
  if (spec.num_classes < 2)
    fail(ErrorKind::Config, "model '", spec.arch, "': need at least 2 classes");
  Model m;
  m.spec = spec;
  m.shapes = chain_shapes(spec);
  std::seed_seq sq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  std::mt19937 gen(sq);
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const DynamicConvConfig& cv = ls.conv;
    const std::string& n = cv.name;
    if (ls.dynamic) {
      m.dynamic_layers.push_back(static_cast<int>(l));
      DynamicConvParams p = make_dynamic_conv<float>(cv, gen);
      m.store.add(pname(n, "w"), p.w);
      if (cv.bias) m.store.add(pname(n, "b"), p.b);
      for (size_t j = 0; j < p.cheap_t.size(); ++j)
        if (p.cheap_t[j].kind != CheapKind::Identity)
          m.store.add(pname(n, "cheap_t" + std::to_string(j + 1) + ".w"), p.cheap_t[j].weights);
      if (p.cheap_c.kind != CheapKind::Identity)
        m.store.add(pname(n, "cheap_c.w"), p.cheap_c.weights);
      GateParams g =
          make_gate<float>(cv.c_in * m.shapes[l].t_in, cv.s_t, cv.s_c, spec.gate_d_h, gen);
      m.store.add(pname(n, "gate.w1"), g.w1);
      m.store.add(pname(n, "gate.w2"), g.w2);
      m.store.add(pname(n, "gate.beta"), g.beta);
      m.store.add(pname(n, "gate.bn_gamma"), g.bn_gamma);
      m.store.add(pname(n, "gate.bn_beta"), g.bn_beta);
      m.store.add(pname(n, "gate.bn_mean"), g.bn.running_mean);
      m.store.add(pname(n, "gate.bn_var"), g.bn.running_var);
    } else {
      const int64_t fan_in = cv.c_in * cv.k_t * cv.k_h * cv.k_w;
      m.store.add(pname(n, "w"),
                  he_init<float>({cv.c_out, cv.c_in, cv.k_t, cv.k_h, cv.k_w}, fan_in, gen));
      if (cv.bias) m.store.add(pname(n, "b"), Tensor({cv.c_out}));
    }
  }
  int64_t c_last = spec.input_dims[0];
  for (const LayerSpec& ls : spec.layers)
    if (ls.input_layer < 0) c_last = ls.conv.c_out;
  m.head_in = c_last;
  if (spec.head_fc) {
    m.store.add("head.w", he_init<float>({c_last, spec.num_classes}, c_last, gen));
    m.store.add("head.b", Tensor({spec.num_classes}));
  }
  return m;
}

void save_model(const std::string& path, const Model& m, const Json& extra_meta) {
  Json meta = extra_meta.is_object() ? extra_meta : Json::object();
  meta["model_spec"] = m.spec.to_json();
  save_checkpoint(path, m.store, meta);
}

Model model_from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("model_spec"))
    fail(ErrorKind::Io, "checkpoint has no model_spec metadata");
  Model m = build_model(ModelSpec::from_json(ck.meta.at("model_spec")), 0);
  if (ck.params.size() != m.store.size())
    fail(ErrorKind::Io, "checkpoint holds ", ck.params.size(), " tensors but the model needs ",
         m.store.size());
  for (const auto& [name, t] : m.store.items()) {
    if (!ck.params.contains(name)) fail(ErrorKind::Io, "checkpoint missing tensor '", name, "'");
    const Tensor& src = ck.params.at(name);
    if (src.shape != t.shape)
      fail(ErrorKind::Io, "checkpoint tensor '", name, "' has shape ", src.shape_str(),
           " but the model expects ", t.shape_str());
    std::copy(src.ptr(), src.ptr() + src.numel(), m.store.at(name).ptr());
  }
  return m;
}

ForwardResult model_forward(Model& m, Tape* tape, const Tensor& x, const ForwardOptions& opt) {
  if (m.spec.cost_only)
    fail(ErrorKind::Config, "model '", m.spec.arch, "' is cost-only and cannot run forward");
  if (x.ndim() != 5) fail_shape("model_forward: input must be [N,C,T,H,W], got ", x.shape_str());
  for (size_t i = 0; i < 4; ++i)
    if (x.dim(i + 1) != m.spec.input_dims[i])
      fail_shape("model_forward: input ", x.shape_str(), " violates the model contract [C,T,H,W] = [",
                 m.spec.input_dims[0], ",", m.spec.input_dims[1], ",", m.spec.input_dims[2], ",",
                 m.spec.input_dims[3], "]");
  if (!m.spec.head_fc) fail(ErrorKind::Config, "model '", m.spec.arch, "' has no classifier head");
  const int64_t N = x.dim(0);
  const bool dyn_mode = opt.mode != ForwardMode::Base;
  const Mode nn_mode = opt.mode == ForwardMode::DynamicTrain ? Mode::Train : Mode::Eval;

  std::vector<BoundLayer> layers = bind_layers(m, tape);
  ForwardResult res;
  res.traces.resize(static_cast<size_t>(N));
  std::vector<std::vector<std::pair<int, int>>> picks(static_cast<size_t>(N));

  Tensor cur = x;
  for (BoundLayer& bl : layers) {
    const DynamicConvConfig& cv = bl.sp->conv;
    if (!bl.sp->dynamic || !dyn_mode) {
      cur = conv3d(cur, bl.p.w, cv.bias ? &bl.p.b : nullptr, cv.stride, cv.pad);
    } else if (opt.forced_full) {
      cur = branch_forward(bl.p, cur, 1, 1);
      for (int64_t n = 0; n < N; ++n) {
        picks[static_cast<size_t>(n)].emplace_back(1, 1);
        LayerPolicy lp;
        lp.layer = cv.name;
        lp.v_t.assign(static_cast<size_t>(cv.s_t), 0.0f);
        lp.v_c.assign(static_cast<size_t>(cv.s_c), 0.0f);
        lp.v_t[0] = lp.v_c[0] = 1.0f;
        res.traces[static_cast<size_t>(n)].layers.push_back(std::move(lp));
      }
    } else {
      Tensor policy = gate_forward(bl.gate, cur, nn_mode);
      Tensor vt = gate_v_t(policy, bl.gate);
      Tensor vc = gate_v_c(policy, bl.gate);
      for (int64_t n = 0; n < N; ++n) {
        const float* rt = vt.ptr() + n * cv.s_t;
        const float* rc = vc.ptr() + n * cv.s_c;
        const int ist = largest_active_index(rt, cv.s_t, opt.eps_active);
        const int isc = largest_active_index(rc, cv.s_c, opt.eps_active);
        picks[static_cast<size_t>(n)].emplace_back(ist, isc);
        LayerPolicy lp;
        lp.layer = cv.name;
        lp.v_t.assign(rt, rt + cv.s_t);
        lp.v_c.assign(rc, rc + cv.s_c);
        lp.i_s_t = ist;
        lp.i_s_c = isc;
        res.traces[static_cast<size_t>(n)].layers.push_back(std::move(lp));
      }
      if (opt.mode == ForwardMode::DynamicTrain) {
        res.policy_t.push_back(vt);
        res.policy_c.push_back(vc);
      }
      cur = shared_weight_forward(bl.p, cur, vt, vc, nn_mode, opt.eps_active);
    }
    cur = relu(cur);
  }

  Tensor pooled = global_avg_pool(cur);
  Tensor hw = bind_param(tape, m.store, "head.w");
  Tensor hb = bind_param(tape, m.store, "head.b");
  res.logits = fully_connected(pooled, hw, hb);

  const double base_cost = model_static_flops(m);
  for (int64_t n = 0; n < N; ++n) {
    PolicyTrace& tr = res.traces[static_cast<size_t>(n)];
    const float* row = res.logits.ptr() + n * m.spec.num_classes;
    tr.prediction = static_cast<int>(
        std::max_element(row, row + m.spec.num_classes) - row);
    tr.realized_flops = dyn_mode && !opt.forced_full
                            ? model_realized_flops(m, picks[static_cast<size_t>(n)], true)
                            : (dyn_mode ? base_cost + model_gate_flops(m) : base_cost);
  }
  return res;
}

double spec_static_gflops(const ModelSpec& spec) {
  return spec_static_flops(spec, chain_shapes(spec)) * 1e-9;
}

double model_static_flops(const Model& m) { return spec_static_flops(m.spec, m.shapes); }

double model_gate_flops(const Model& m) {
  double total = 0.0;
  for (int l : m.dynamic_layers) {
    const DynamicConvConfig& cv = m.spec.layers[static_cast<size_t>(l)].conv;
    total += gate_flops(cv.c_in, m.shapes[static_cast<size_t>(l)].t_in, m.spec.gate_d_h,
                        cv.s_t + cv.s_c);
  }
  return total;
}

double model_realized_flops(const Model& m, const std::vector<std::pair<int, int>>& i_s_tc,
                            bool include_gates) {
  if (i_s_tc.size() != m.dynamic_layers.size())
    fail_shape("model_realized_flops: got ", i_s_tc.size(), " picks for ",
               m.dynamic_layers.size(), " dynamic layers");
  double total = include_gates ? model_gate_flops(m) : 0.0;
  size_t d = 0;
  for (size_t l = 0; l < m.spec.layers.size(); ++l) {
    const DynamicConvConfig& cv = m.spec.layers[l].conv;
    const LayerCostSpec cs =
        dynamic_conv_cost_spec(cv, m.shapes[l].t_in, m.shapes[l].h_in, m.shapes[l].w_in);
    if (m.spec.layers[l].dynamic) {
      const auto [ist, isc] = i_s_tc[d++];
      total += dynamic_layer_cost(cs, ist, isc, cv.cheap_temporal, cv.cheap_channel);
    } else {
      total += conv_flops(cs);
    }
  }
  if (m.spec.head_fc) total += static_cast<double>(m.head_in) * m.spec.num_classes;
  return total;
}

std::vector<double> model_dynamic_layer_costs(const Model& m) {
  std::vector<double> out;
  for (int l : m.dynamic_layers) {
    const DynamicConvConfig& cv = m.spec.layers[static_cast<size_t>(l)].conv;
    out.push_back(conv_flops(dynamic_conv_cost_spec(cv, m.shapes[static_cast<size_t>(l)].t_in,
                                                    m.shapes[static_cast<size_t>(l)].h_in,
                                                    m.shapes[static_cast<size_t>(l)].w_in)));
  }
  return out;
}

FeatureExtractor model_feature_extractor(Model& m) {
  return [&m](const Tensor& clip) {
    if (clip.ndim() != 4)
      fail_shape("feature extractor: clip must be [C,T,H,W], got ", clip.shape_str());
    Tensor x = reshape(clip, {1, clip.dim(0), clip.dim(1), clip.dim(2), clip.dim(3)});
    std::vector<BoundLayer> layers = bind_layers(m, nullptr);
    std::vector<std::pair<std::string, Tensor>> feats;
    Tensor cur = x;
    for (BoundLayer& bl : layers) {
      const DynamicConvConfig& cv = bl.sp->conv;
      cur = relu(conv3d(cur, bl.p.w, cv.bias ? &bl.p.b : nullptr, cv.stride, cv.pad));
      feats.emplace_back(cv.name, cur);
    }
    return feats;
  };
}

std::vector<std::string> builtin_arch_names() { return {"toy3d", "r2plus1d_tiny", "r2plus1d18"}; }

namespace {

LayerSpec conv_layer(const std::string& name, int64_t ci, int64_t co, int64_t kt, int64_t kh,
                     int64_t kw, Stride3 s, Pad3 p, bool dynamic, int input_layer = -1) {
  LayerSpec ls;
  ls.conv.name = name;
  ls.conv.c_in = ci;
  ls.conv.c_out = co;
  ls.conv.k_t = kt;
  ls.conv.k_h = kh;
  ls.conv.k_w = kw;
  ls.conv.stride = s;
  ls.conv.pad = p;
  ls.dynamic = dynamic;
  ls.input_layer = input_layer;
  return ls;
}

// Mid-channel count of a (2+1)D factorization, rounded down to keep the
// parameter count comparable to the 3D conv it replaces; forced even so the
// channel search space divides it.
int64_t midplanes(int64_t ci, int64_t co, bool even) {
  int64_t m = 27 * ci * co / (9 * ci + 3 * co);
  if (even && m % 2 != 0) --m;
  return m;
}

ModelSpec toy3d_spec(int64_t frames, int64_t res, int num_classes) {
  ModelSpec s;
  s.arch = "toy3d";
  s.input_dims = {3, frames, res, res};
  s.num_classes = num_classes;
  s.layers.push_back(conv_layer("conv1", 3, 8, 1, 7, 7, {1, 1, 1}, {0, 3, 3}, true));
  s.layers.push_back(conv_layer("conv2", 8, 16, 3, 3, 3, {1, 2, 2}, {1, 1, 1}, true));
  s.layers.push_back(conv_layer("conv3", 16, 32, 3, 3, 3, {1, 2, 2}, {1, 1, 1}, true));
  s.layers.push_back(conv_layer("conv4", 32, 64, 3, 3, 3, {2, 2, 2}, {1, 1, 1}, true));
  return s;
}

ModelSpec r2plus1d_tiny_spec(int64_t frames, int64_t res, int num_classes) {
  ModelSpec s;
  s.arch = "r2plus1d_tiny";
  s.input_dims = {3, frames, res, res};
  s.num_classes = num_classes;
  const int64_t m1 = midplanes(3, 16, false);
  const int64_t m2 = midplanes(16, 32, true);
  const int64_t m3 = midplanes(32, 64, true);
  s.layers.push_back(conv_layer("b1_s", 3, m1, 1, 3, 3, {1, 2, 2}, {0, 1, 1}, false));
  s.layers.push_back(conv_layer("b1_t", m1, 16, 3, 1, 1, {1, 1, 1}, {1, 0, 0}, false));
  s.layers.push_back(conv_layer("b2_s", 16, m2, 1, 3, 3, {1, 2, 2}, {0, 1, 1}, true));
  s.layers.push_back(conv_layer("b2_t", m2, 32, 3, 1, 1, {1, 1, 1}, {1, 0, 0}, false));
  s.layers.push_back(conv_layer("b3_s", 32, m3, 1, 3, 3, {1, 2, 2}, {0, 1, 1}, true));
  s.layers.push_back(conv_layer("b3_t", m3, 64, 3, 1, 1, {2, 1, 1}, {1, 0, 0}, false));
  return s;
}

// Layer-accurate R(2+1)D-18 shape listing for cost reproduction: stem plus
// four 2-block stages (64/128/256/512), each block two factorized convs,
// 1x1x1 strided shortcuts on downsampling blocks. Spatial 3x3 convs in the
// first three stages carry dynamic flags; the last stage can reach a single
// frame, which the temporal search space does not admit.
ModelSpec r2plus1d18_spec(int64_t frames, int64_t res) {
  if (frames != 8 && frames != 16 && frames != 32)
    fail(ErrorKind::Config, "r2plus1d18: frames must be one of 8, 16, 32 (got ", frames, ")");
  ModelSpec s;
  s.arch = "r2plus1d18";
  s.input_dims = {3, frames, res, res};
  s.num_classes = 0;
  s.head_fc = false;
  s.cost_only = true;
  s.layers.push_back(conv_layer("stem_s", 3, 45, 1, 7, 7, {1, 2, 2}, {0, 3, 3}, false));
  s.layers.push_back(conv_layer("stem_t", 45, 64, 3, 1, 1, {1, 1, 1}, {1, 0, 0}, false));
  const int64_t chans[4] = {64, 128, 256, 512};
  int64_t c_in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int64_t c_out = chans[stage];
    const bool down = stage > 0;
    const bool dyn = stage < 3;
    const std::string sn = "s" + std::to_string(stage + 1);
    for (int block = 0; block < 2; ++block) {
      const std::string bn = sn + (block == 0 ? "a" : "b");
      const bool bdown = down && block == 0;
      const int64_t bin = block == 0 ? c_in : c_out;
      const int64_t mid1 = midplanes(bin, c_out, dyn);
      const int64_t mid2 = midplanes(c_out, c_out, dyn);
      const int first = static_cast<int>(s.layers.size());
      s.layers.push_back(conv_layer(bn + "1_s", bin, mid1, 1, 3, 3,
                                    {1, bdown ? 2 : 1, bdown ? 2 : 1}, {0, 1, 1}, dyn));
      s.layers.push_back(conv_layer(bn + "1_t", mid1, c_out, 3, 1, 1,
                                    {bdown ? 2 : 1, 1, 1}, {1, 0, 0}, false));
      s.layers.push_back(conv_layer(bn + "2_s", c_out, mid2, 1, 3, 3, {1, 1, 1}, {0, 1, 1}, dyn));
      s.layers.push_back(conv_layer(bn + "2_t", mid2, c_out, 3, 1, 1, {1, 1, 1}, {1, 0, 0}, false));
      if (bdown)
        s.layers.push_back(conv_layer(bn + "_sc", bin, c_out, 1, 1, 1, {2, 2, 2}, {0, 0, 0},
                                      false, first));
    }
    c_in = c_out;
  }
  return s;
}

}  // namespace

ModelSpec builtin_spec(const std::string& arch, int64_t frames, int64_t res, int num_classes) {
  ModelSpec s;
  if (arch == "toy3d") {
    s = toy3d_spec(frames, res, num_classes);
  } else if (arch == "r2plus1d_tiny") {
    s = r2plus1d_tiny_spec(frames, res, num_classes);
  } else if (arch == "r2plus1d18") {
    s = r2plus1d18_spec(frames, res);
  } else {
    std::string known;
    for (const std::string& n : builtin_arch_names()) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::Config, "unknown arch '", arch, "' (known: ", known, ")");
  }
  chain_shapes(s);  // surface invalid frames/res combinations immediately
  return s;
}

}  // namespace vared
