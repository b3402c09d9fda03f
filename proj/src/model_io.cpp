#include "cwa/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cwa/errors.hpp"
#include "cwa/rng.hpp"

namespace cwa {

namespace {

constexpr char kMagic[4] = {'C', 'W', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; byte-swapping writers are not implemented");

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) {
            throw Error("cannot open model file for writing: " + path);
        }
    }

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u16(std::uint16_t v) { bytes(&v, sizeof v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void tensor(const Tensor& t) { bytes(t.data().data(), t.data().size() * sizeof(float)); }

    void close(const std::string& path) {
        out_.flush();
        if (!out_) {
            throw Error("write failure on model file: " + path);
        }
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error("cannot open model file: " + path);
        }
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void bytes(void* p, std::size_t n) {
        if (pos_ + n > buf_.size()) {
            throw CorruptionError("model file truncated: needed " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos_) + ", file has " +
                                  std::to_string(buf_.size()));
        }
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::uint16_t u16() { std::uint16_t v; bytes(&v, sizeof v); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
    float f32() { float v; bytes(&v, sizeof v); return v; }

    Tensor tensor(std::vector<std::int64_t> shape) {
        Tensor t(std::move(shape));
        bytes(t.data().data(), t.data().size() * sizeof(float));
        return t;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t offset() const { return pos_; }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

void check_weight_shapes(const Weights& w, const ModelConfig& cfg) {
    cfg.validate();
    const auto expect = [](const Tensor& t, std::vector<std::int64_t> shape, const char* name) {
        if (t.shape() != shape) {
            throw DimensionError(std::string("weight tensor ") + name + " has the wrong shape");
        }
    };
    const std::int64_t d = cfg.d_model, ff = cfg.d_ff;
    expect(w.token_embedding, {cfg.vocab_size, d}, "W_E");
    expect(w.position_embedding, {cfg.max_seq, d}, "P");
    if (static_cast<int>(w.layers.size()) != cfg.layers) {
        throw DimensionError("layer count does not match config");
    }
    for (const LayerWeights& lw : w.layers) {
        expect(lw.gamma_attn, {d}, "gamma_attn");
        expect(lw.w_q, {d, d}, "W_Q");
        expect(lw.w_k, {d, d}, "W_K");
        expect(lw.w_v, {d, d}, "W_V");
        expect(lw.w_o, {d, d}, "W_O");
        expect(lw.gamma_mlp, {d}, "gamma_mlp");
        expect(lw.w_gate, {d, ff}, "W_gate");
        expect(lw.w_up, {d, ff}, "W_up");
        expect(lw.w_down, {ff, d}, "W_down");
        expect(lw.b_down, {d}, "b_down");
    }
    expect(w.gamma_final, {d}, "gamma_final");
    expect(w.unembedding, {d, cfg.vocab_size}, "W_U");
}

} // namespace

void save_model(const Weights& w, const ModelConfig& cfg, const Vocabulary& vocab,
                const std::string& path) {
    check_weight_shapes(w, cfg);
    if (vocab.size() != cfg.vocab_size) {
        throw DimensionError("vocabulary size disagrees with config");
    }
    Writer out(path);
    out.bytes(kMagic, 4);
    out.u32(kVersion);
    out.u32(static_cast<std::uint32_t>(cfg.layers));
    out.u32(static_cast<std::uint32_t>(cfg.heads));
    out.u32(static_cast<std::uint32_t>(cfg.d_model));
    out.u32(static_cast<std::uint32_t>(cfg.d_ff));
    out.u32(static_cast<std::uint32_t>(cfg.vocab_size));
    out.u32(static_cast<std::uint32_t>(cfg.max_seq));
    out.f32(cfg.eps);
    out.u32(static_cast<std::uint32_t>(vocab.size()));
    for (const std::string& entry : vocab.entries()) {
        if (entry.size() > 0xffff) {
            throw DimensionError("vocabulary entry longer than 65535 bytes");
        }
        out.u16(static_cast<std::uint16_t>(entry.size()));
        out.bytes(entry.data(), entry.size());
    }
    out.tensor(w.token_embedding);
    out.tensor(w.position_embedding);
    for (const LayerWeights& lw : w.layers) {
        out.tensor(lw.gamma_attn);
        out.tensor(lw.w_q);
        out.tensor(lw.w_k);
        out.tensor(lw.w_v);
        out.tensor(lw.w_o);
        out.tensor(lw.gamma_mlp);
        out.tensor(lw.w_gate);
        out.tensor(lw.w_up);
        out.tensor(lw.w_down);
        out.tensor(lw.b_down);
    }
    out.tensor(w.gamma_final);
    out.tensor(w.unembedding);
    out.close(path);
}

LoadedModel load_model(const std::string& path) {
    Reader in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a model file (bad magic): " + path);
    }
    const std::uint32_t version = in.u32();
    if (version != kVersion) {
        throw FormatError("unsupported model file version " + std::to_string(version));
    }
    ModelConfig cfg;
    cfg.layers = static_cast<int>(in.u32());
    cfg.heads = static_cast<int>(in.u32());
    cfg.d_model = static_cast<int>(in.u32());
    cfg.d_ff = static_cast<int>(in.u32());
    cfg.vocab_size = static_cast<int>(in.u32());
    cfg.max_seq = static_cast<int>(in.u32());
    cfg.eps = in.f32();
    cfg.validate();

    const std::uint32_t vocab_count = in.u32();
    if (static_cast<int>(vocab_count) != cfg.vocab_size) {
        throw CorruptionError("vocab table length disagrees with header at offset " +
                              std::to_string(in.offset()));
    }
    std::vector<std::string> entries;
    entries.reserve(vocab_count);
    for (std::uint32_t i = 0; i < vocab_count; ++i) {
        const std::uint16_t len = in.u16();
        std::string e(len, '\0');
        in.bytes(e.data(), len);
        entries.push_back(std::move(e));
    }

    LoadedModel m;
    m.config = cfg;
    m.vocab = Vocabulary::from_entries(std::move(entries));
    const std::int64_t d = cfg.d_model, ff = cfg.d_ff;
    m.weights.token_embedding = in.tensor({cfg.vocab_size, d});
    m.weights.position_embedding = in.tensor({cfg.max_seq, d});
    m.weights.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (LayerWeights& lw : m.weights.layers) {
        lw.gamma_attn = in.tensor({d});
        lw.w_q = in.tensor({d, d});
        lw.w_k = in.tensor({d, d});
        lw.w_v = in.tensor({d, d});
        lw.w_o = in.tensor({d, d});
        lw.gamma_mlp = in.tensor({d});
        lw.w_gate = in.tensor({d, ff});
        lw.w_up = in.tensor({d, ff});
        lw.w_down = in.tensor({ff, d});
        lw.b_down = in.tensor({d});
    }
    m.weights.gamma_final = in.tensor({d});
    m.weights.unembedding = in.tensor({d, cfg.vocab_size});
    if (in.remaining() != 0) {
        throw CorruptionError("model file has " + std::to_string(in.remaining()) +
                              " unexpected trailing bytes at offset " +
                              std::to_string(in.offset()));
    }
    return m;
}

const std::vector<std::string>& reference_subwords() {
    // English and Italian fragments, leading spaces included, with a few
    // split stems so some words take multiple tokens.
    static const std::vector<std::string> subwords = {
        "The",      " dog",    " runs",    " fast",   " cat",     " sits",   " bird",
        " sings",   " sun",    " rises",   " moon",   " the",     " a",      " an",
        " and",     " is",     " was",     " very",   " word",    " words",  " sent",
        "ence",     " te",     "xt",       " with",   " using",   " exactly"," this",
        "This",     " phrase", " has",     " from",   " start",   " to",     " finish",
        "Here",     "'s",      " that",    " includes"," in",     " total",  "Generate",
        "Write",    " containing",         " sentence",
        "Il",       " cane",   " corre",   " gatto",  " siede",   " sole",   " sorge",
        " luna",    " una",    " fra",     "se",      " par",     "ole",     " parole",
        " con",     " esattamente",        " testo",  " frase",   "Questa",  " \xc3\xa8",
        "Genera",   "Scrivi",  " usando",  " contenente",         " che",    " include",
        " totale",  " dall",   "'inizio",  " alla",   " fine",    "Ecco",    " ha",
        " il",      " molto",  " veloce",  " bello",  " giorno",  " notte",
    };
    return subwords;
}

Vocabulary reference_vocabulary() {
    return Vocabulary::with_byte_fallback(reference_subwords());
}

Vocabulary reference_vocabulary(const std::vector<std::string>& subwords) {
    return Vocabulary::with_byte_fallback(subwords);
}

Weights make_reference_weights(std::uint64_t seed, const ModelConfig& cfg) {
    cfg.validate();
    Xoshiro256 rng(seed);
    const float scale = 0.02f;
    const auto fill = [&](Tensor& t) {
        for (float& x : t.data()) {
            x = rng.next_gaussian(0.0f, scale);
        }
    };
    const std::int64_t d = cfg.d_model, ff = cfg.d_ff;
    Weights w;
    w.token_embedding = Tensor({cfg.vocab_size, d});
    fill(w.token_embedding);
    w.position_embedding = Tensor({cfg.max_seq, d});
    fill(w.position_embedding);
    w.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (LayerWeights& lw : w.layers) {
        lw.gamma_attn = Tensor::full({d}, 1.0f);
        lw.w_q = Tensor({d, d});
        fill(lw.w_q);
        lw.w_k = Tensor({d, d});
        fill(lw.w_k);
        lw.w_v = Tensor({d, d});
        fill(lw.w_v);
        lw.w_o = Tensor({d, d});
        fill(lw.w_o);
        lw.gamma_mlp = Tensor::full({d}, 1.0f);
        lw.w_gate = Tensor({d, ff});
        fill(lw.w_gate);
        lw.w_up = Tensor({d, ff});
        fill(lw.w_up);
        lw.w_down = Tensor({ff, d});
        fill(lw.w_down);
        lw.b_down = Tensor({d});
    }
    w.gamma_final = Tensor::full({d}, 1.0f);
    w.unembedding = Tensor({d, cfg.vocab_size});
    fill(w.unembedding);
    return w;
}

Weights make_rigged_model(const Weights& base, const RigSpec& rig) {
    const std::int64_t d = base.gamma_final.dim(0);
    const std::int64_t v = base.unembedding.dim(1);
    if (rig.token < 0 || rig.token >= v) {
        throw DomainError("rig token id outside the unembedding matrix");
    }
    Tensor bias({d});
    double norm_sq = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
        const float x = base.unembedding.at(j, rig.token);
        bias[j] = x;
        norm_sq += static_cast<double>(x) * static_cast<double>(x);
    }
    const float norm = static_cast<float>(std::sqrt(norm_sq));
    if (!(norm > 0.0f)) {
        throw DomainError("unembedding column for the rig token is zero");
    }
    for (std::int64_t j = 0; j < d; ++j) {
        bias[j] = rig.scale * bias[j] / norm;
    }
    return make_rigged_model(base, rig.layer, bias);
}

Weights make_rigged_model(const Weights& base, int layer, const Tensor& bias) {
    if (layer < 0 || layer >= static_cast<int>(base.layers.size())) {
        throw DomainError("rig layer " + std::to_string(layer) + " outside the model");
    }
    if (!bias.same_shape(base.layers[static_cast<std::size_t>(layer)].b_down)) {
        throw DimensionError("rig bias shape does not match b_down");
    }
    Weights rigged = base;
    rigged.layers[static_cast<std::size_t>(layer)].b_down = bias;
    return rigged;
}

} // namespace cwa
