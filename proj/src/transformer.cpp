#include "emo/transformer.hpp"

#include "emo/error.hpp"

namespace emo {

void TransformerConfig::validate() const {
  if (depth < 1) throw ConfigError("transformer depth must be >= 1");
  if (model_dim < 1 || num_heads < 1) throw ConfigError("model_dim and num_heads must be positive");
  if (model_dim % num_heads != 0) throw ConfigError("model_dim must be divisible by num_heads");
  if (ffn_multiplier < 1) throw ConfigError("ffn_multiplier must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
}

void init_linear(ParamStore& params, const std::string& prefix, Eigen::Index in, Eigen::Index out, Rng& rng) {
  params.add(prefix + ".weight", glorot_uniform(in, out, rng));
  params.add(prefix + ".bias", ad::Matrix::Zero(1, out));
}

namespace {

void init_layer_norm(ParamStore& params, const std::string& prefix, Eigen::Index d) {
  params.add(prefix + ".gain", ad::Matrix::Ones(1, d));
  params.add(prefix + ".offset", ad::Matrix::Zero(1, d));
}

std::string layer_prefix(const std::string& prefix, int i) { return prefix + "layer" + std::to_string(i) + "."; }

ad::Var norm(const ParamBinding& p, const std::string& prefix, ad::Var x) {
  return ad::layer_norm(x, p[prefix + ".gain"], p[prefix + ".offset"]);
}

ad::Var maybe_dropout(ad::Var x, const EncoderContext& ctx) {
  if (!ctx.training || ctx.dropout_rate <= 0.0) return x;
  if (ctx.rng == nullptr) throw Error("dropout requires a random stream");
  return ad::mask(x, dropout_mask(x.rows(), x.cols(), ctx.dropout_rate, *ctx.rng));
}

}  // namespace

void init_temporal_encoder(ParamStore& params, const std::string& prefix, const TransformerConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index d = cfg.model_dim;
  const Eigen::Index f = static_cast<Eigen::Index>(cfg.model_dim) * cfg.ffn_multiplier;
  params.add(prefix + "cls", normal_matrix(1, d, 0.02, rng));
  params.add(prefix + "pos", normal_matrix(cfg.max_seq_len + 1, d, 0.02, rng));
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string lp = layer_prefix(prefix, i);
    init_layer_norm(params, lp + "ln1", d);
    ad::Matrix qkv(d, 3 * d);
    for (int block = 0; block < 3; ++block) qkv.middleCols(block * d, d) = glorot_uniform(d, d, rng);
    params.add(lp + "attn.qkv.weight", std::move(qkv));
    // No key bias: it shifts every score of a query equally, so softmax
    // ignores it and its gradient is identically zero.
    params.add(lp + "attn.q.bias", ad::Matrix::Zero(1, d));
    params.add(lp + "attn.v.bias", ad::Matrix::Zero(1, d));
    init_linear(params, lp + "attn.out", d, d, rng);
    init_layer_norm(params, lp + "ln2", d);
    init_linear(params, lp + "ffn.fc1", d, f, rng);
    init_linear(params, lp + "ffn.fc2", f, d, rng);
  }
  init_layer_norm(params, prefix + "ln_final", d);
}

ad::Var linear(const ParamBinding& p, const std::string& prefix, ad::Var x) {
  return ad::add_row(ad::matmul(x, p[prefix + ".weight"]), p[prefix + ".bias"]);
}

namespace {

ad::Var attention_inputs(const ParamBinding& p, const std::string& lp, ad::Var h) {
  const ad::Var q_bias = p[lp + "attn.q.bias"];
  const ad::Var k_bias = p.tape().constant(ad::Matrix::Zero(1, q_bias.cols()));
  const ad::Var bias = ad::concat_cols(ad::concat_cols(q_bias, k_bias), p[lp + "attn.v.bias"]);
  return ad::add_row(ad::matmul(h, p[lp + "attn.qkv.weight"]), bias);
}

}  // namespace

ad::Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < keep ? scale : 0.0;
  return m;
}

ad::Var encode_batch(const ParamBinding& p, const std::string& prefix, const TransformerConfig& cfg, ad::Var frames,
                     std::span<const Eigen::Index> lengths, const EncoderContext& ctx) {
  if (frames.cols() != cfg.model_dim) throw Error("encoder input width != model_dim");
  if (lengths.empty()) throw Error("encoder batch is empty");

  std::vector<ad::RowRef> token_rows;
  std::vector<ad::RowRef> pos_rows;
  std::vector<ad::Segment> segments;
  std::vector<ad::RowRef> cls_rows;
  Eigen::Index frame_offset = 0;
  for (Eigen::Index len : lengths) {
    if (len < 1 || len > cfg.max_seq_len) throw Error("sequence length out of range [1, max_seq_len]");
    const Eigen::Index seg_offset = static_cast<Eigen::Index>(token_rows.size());
    segments.push_back({seg_offset, len + 1});
    cls_rows.push_back({0, seg_offset});
    token_rows.push_back({0, 0});
    pos_rows.push_back({0, 0});
    for (Eigen::Index t = 0; t < len; ++t) {
      token_rows.push_back({1, frame_offset + t});
      pos_rows.push_back({0, t + 1});
    }
    frame_offset += len;
  }
  if (frame_offset != frames.rows()) throw Error("sequence lengths do not match stacked frames");

  const ad::Var sources[] = {p[prefix + "cls"], frames};
  ad::Var x = ad::gather_rows(sources, token_rows);
  if (cfg.use_positional) {
    const ad::Var pos[] = {p[prefix + "pos"]};
    x = ad::add(x, ad::gather_rows(pos, pos_rows));
  }

  for (int i = 0; i < cfg.depth; ++i) {
    const std::string lp = layer_prefix(prefix, i);
    ad::Var h = norm(p, lp + "ln1", x);
    h = attention_inputs(p, lp, h);
    h = ad::segment_attention(h, segments, cfg.num_heads, ctx.probe);
    h = linear(p, lp + "attn.out", h);
    x = ad::add(x, maybe_dropout(h, ctx));

    h = norm(p, lp + "ln2", x);
    h = ad::gelu(linear(p, lp + "ffn.fc1", h));
    h = linear(p, lp + "ffn.fc2", h);
    x = ad::add(x, maybe_dropout(h, ctx));
  }

  const ad::Var final_src[] = {x};
  return norm(p, prefix + "ln_final", ad::gather_rows(final_src, cls_rows));
}

ad::Matrix project_audio(const ad::Matrix& frames, const ParamStore& params, const std::string& prefix) {
  const ad::Matrix& w = params.at(prefix + ".weight");
  const ad::Matrix& b = params.at(prefix + ".bias");
  if (frames.cols() != w.rows()) throw Error("audio projection: input dim mismatch");
  ad::Matrix out = frames * w;
  out.rowwise() += b.row(0);
  return out;
}

Eigen::VectorXd encode_sequence(const ad::Matrix& tokens, const ParamStore& params, const std::string& prefix,
                                const TransformerConfig& cfg, bool training, Rng* rng, ad::AttentionProbe* probe) {
  ad::Tape tape;
  ParamBinding binding(tape, params, false);
  const Eigen::Index lengths[] = {tokens.rows()};
  EncoderContext ctx{training, cfg.dropout_rate, rng, probe};
  ad::Var out = encode_batch(binding, prefix, cfg, tape.constant(tokens), lengths, ctx);
  return out.value().row(0).transpose();
}

}  // namespace emo
