#pragma once

#include <map>
#include <string>
#include <vector>

#include "locomanip/rng.hpp"

namespace locomanip::nn {

using Vec = std::vector<double>;

struct Param {
  std::string name;
  std::vector<int> shape;
  Vec value, grad, m, v;  // value, gradient, Adam first/second moments

  int size() const { return static_cast<int>(value.size()); }
};

// Named parameter arrays with their Adam state. Handles are stable indices.
class ParamStore {
 public:
  int add(const std::string& name, std::vector<int> shape);
  Param& at(int handle) { return params_[handle]; }
  const Param& at(int handle) const { return params_[handle]; }
  Param* find(const std::string& name);
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  int count() const { return static_cast<int>(params_.size()); }
  int total_size() const;

  void zero_grad();
  double grad_norm() const;

 private:
  std::vector<Param> params_;
};

struct AdamConfig {
  double lr = 1.0e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1.0e-8;
  double max_grad_norm = 1.0;

  void validate() const;
};

// Global-norm clip followed by the bias-corrected Adam update; t is the
// 1-based step count. Returns the pre-clip gradient norm. Throws
// DivergenceError on non-finite gradients or parameters.
double adam_step(ParamStore& store, const AdamConfig& cfg, int t);

void fill_normal(Vec& v, Rng& rng, double std);
// Orthogonal rows (or columns when rows > cols) scaled by gain.
void orthogonal_init(Vec& w, int rows, int cols, double gain, Rng& rng);

void elu_forward(const Vec& x, Vec& y);
void elu_backward(const Vec& x, const Vec& dy, Vec& dx);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out);

  void init_orthogonal(ParamStore& ps, Rng& rng, double gain) const;
  void init_normal(ParamStore& ps, Rng& rng, double scale) const;  // std = scale/sqrt(in)
  // Parameters start at zero by construction; this documents intent at call sites.
  void init_zero(ParamStore& ps) const;

  void forward(const ParamStore& ps, const Vec& x, int batch, Vec& y) const;
  // Accumulates parameter gradients; dx may be null when the input gradient
  // is not needed.
  void backward(ParamStore& ps, const Vec& x, const Vec& dy, int batch, Vec* dx) const;

  int in() const { return in_; }
  int out() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  int w_ = -1, b_ = -1;
};

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // pre-activation per hidden layer
  std::vector<Vec> post;  // post-activation per hidden layer
  int batch = 0;
};

// Dense ELU network with a linear output head.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, int in, const std::vector<int>& hidden, int out);

  void init_orthogonal(ParamStore& ps, Rng& rng, double final_gain = 1.0) const;
  void init_normal(ParamStore& ps, Rng& rng) const;

  void forward(const ParamStore& ps, const Vec& x, int batch, Vec& y, MlpCache* cache) const;
  void backward(ParamStore& ps, const MlpCache& cache, const Vec& dy, Vec* dx) const;

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  int in_ = 0, out_ = 0;
  std::vector<Linear> layers_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int dim, bool affine);

  struct Cache {
    Vec xhat;
    Vec rstd;
    int rows = 0;
  };

  void forward(const ParamStore& ps, const Vec& x, int rows, Vec& y, Cache* cache) const;
  void backward(ParamStore& ps, const Cache& cache, const Vec& dy, Vec& dx) const;

  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  bool affine_ = false;
  int gamma_ = -1, beta_ = -1;
};

// Full (unmasked) multi-head self-attention over one token sequence.
class Attention {
 public:
  Attention() = default;
  Attention(ParamStore& ps, const std::string& name, int dim, int heads);

  struct Cache {
    Vec qkv;   // [T x 3*dim]
    Vec attn;  // [heads x T x T] softmax rows
    Vec ctx;   // [T x dim] pre-projection context
    int tokens = 0;
  };

  void init(ParamStore& ps, Rng& rng) const;
  void forward(const ParamStore& ps, const Vec& x, int tokens, Vec& y, Cache* cache) const;
  void backward(ParamStore& ps, const Vec& x, const Cache& cache, const Vec& dy, Vec& dx) const;

  int dim() const { return dim_; }
  int heads() const { return heads_; }

 private:
  int dim_ = 0, heads_ = 0;
  Linear qkv_, proj_;
};

// Pre-norm transformer block; the condition row enters through adaptive
// scale/shift/gate of both sub-layers, all zero-initialized so the block
// starts as the identity.
class AdaNormBlock {
 public:
  AdaNormBlock() = default;
  AdaNormBlock(ParamStore& ps, const std::string& name, int dim, int heads, int cond_dim,
               int mlp_ratio = 4);

  struct Cache {
    Vec mod;  // [6*dim] condition-derived modulation
    LayerNorm::Cache ln1, ln2;
    Attention::Cache attn;
    Vec h1, h1m, attn_out, x1;
    Vec h2, h2m, f_pre, f_act, f_out;
    int tokens = 0;
  };

  void init(ParamStore& ps, Rng& rng) const;
  void forward(const ParamStore& ps, const Vec& x, const Vec& cond, int tokens, Vec& y,
               Cache* cache) const;
  // dcond accumulates the gradient of the condition row.
  void backward(ParamStore& ps, const Vec& x, const Vec& cond, const Cache& cache, const Vec& dy,
                Vec& dx, Vec& dcond) const;

 private:
  int dim_ = 0, cond_dim_ = 0;
  LayerNorm ln1_, ln2_;
  Attention attn_;
  Linear fc1_, fc2_;
  Linear mod_;
};

std::string shape_string(const std::vector<int>& shape);

// Self-describing binary checkpoint: magic, name/shape table, little-endian
// 64-bit floats for values and Adam moments, then a string metadata table.
// Loading requires the store to declare exactly the stored parameters.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> load_checkpoint(const std::string& path, ParamStore& store);

// Metadata table only, skipping the parameter arrays; lets consumers
// rebuild the architecture before calling load_checkpoint.
std::map<std::string, std::string> read_checkpoint_meta(const std::string& path);

}  // namespace locomanip::nn
