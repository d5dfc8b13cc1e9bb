#include "mmlm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "mmlm/errors.hpp"

namespace mmlm {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) a++;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) b--;
    return s.substr(a, b - a);
}

size_t parse_count(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument(v);
        return static_cast<size_t>(n);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
    }
}

uint64_t parse_seed(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<uint64_t>(n);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool parse_flag(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw DataError("config key '" + key + "' needs true or false, got '" + v + "'");
}

std::string real_str(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

// One registry drives parsing and echoing so the two can never drift.
struct KeyBinding {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeyBinding>>& bindings() {
    static const std::vector<std::pair<std::string, KeyBinding>> keys = [] {
        std::vector<std::pair<std::string, KeyBinding>> k;
        auto add_count = [&](const char* name, auto member) {
            k.push_back({name,
                         {[member](RunConfig& c, const std::string& key, const std::string& v) {
                              member(c) = parse_count(v, key);
                          },
                          [member](const RunConfig& c) {
                              return std::to_string(member(const_cast<RunConfig&>(c)));
                          }}});
        };
        auto add_real = [&](const char* name, auto member) {
            k.push_back({name,
                         {[member](RunConfig& c, const std::string& key, const std::string& v) {
                              member(c) = parse_real(v, key);
                          },
                          [member](const RunConfig& c) {
                              return real_str(member(const_cast<RunConfig&>(c)));
                          }}});
        };
        auto add_flag = [&](const char* name, auto member) {
            k.push_back({name,
                         {[member](RunConfig& c, const std::string& key, const std::string& v) {
                              member(c) = parse_flag(v, key);
                          },
                          [member](const RunConfig& c) {
                              return member(const_cast<RunConfig&>(c)) ? "true" : "false";
                          }}});
        };

        add_count("layers", [](auto& c) -> size_t& { return c.lm.decoder.layers; });
        add_count("model_width", [](auto& c) -> size_t& { return c.lm.decoder.model_width; });
        add_count("ffn_width", [](auto& c) -> size_t& { return c.lm.decoder.ffn_width; });
        add_count("heads", [](auto& c) -> size_t& { return c.lm.decoder.heads; });
        add_count("soft_tokens", [](auto& c) -> size_t& { return c.lm.decoder.soft_tokens; });
        add_count("max_len", [](auto& c) -> size_t& { return c.lm.decoder.max_len; });
        add_real("dropout", [](auto& c) -> double& { return c.lm.decoder.dropout; });
        add_real("ln_eps", [](auto& c) -> double& { return c.lm.decoder.ln_eps; });
        add_real("init_gain", [](auto& c) -> double& { return c.lm.decoder.init_gain; });

        add_count("image_size", [](auto& c) -> size_t& { return c.lm.vision.image_size; });
        add_count("patch_size", [](auto& c) -> size_t& { return c.lm.vision.patch_size; });
        add_count("embed_dim", [](auto& c) -> size_t& { return c.lm.vision.embed_dim; });
        add_count("vision_depth", [](auto& c) -> size_t& { return c.lm.vision.depth; });
        add_count("vision_heads", [](auto& c) -> size_t& { return c.lm.vision.heads; });
        add_count("vision_ffn_width", [](auto& c) -> size_t& { return c.lm.vision.ffn_width; });
        add_flag("freeze_below_last",
                 [](auto& c) -> bool& { return c.lm.vision.freeze_below_last; });

        add_count("resampler_depth", [](auto& c) -> size_t& { return c.lm.resampler.depth; });
        add_count("resampler_heads", [](auto& c) -> size_t& { return c.lm.resampler.heads; });
        add_count("resampler_ffn_width",
                  [](auto& c) -> size_t& { return c.lm.resampler.ffn_width; });

        k.push_back({"seed",
                     {[](RunConfig& c, const std::string& key, const std::string& v) {
                          c.train.seed = parse_seed(v, key);
                      },
                      [](const RunConfig& c) { return std::to_string(c.train.seed); }}});
        add_count("quota_text", [](auto& c) -> size_t& { return c.train.quotas[0]; });
        add_count("quota_pair", [](auto& c) -> size_t& { return c.train.quotas[1]; });
        add_count("quota_interleaved", [](auto& c) -> size_t& { return c.train.quotas[2]; });
        add_count("quota_instruction", [](auto& c) -> size_t& { return c.train.quotas[3]; });
        add_real("peak_lr", [](auto& c) -> double& { return c.train.peak_lr; });
        add_count("warmup_steps", [](auto& c) -> size_t& { return c.train.warmup_steps; });
        add_count("total_steps", [](auto& c) -> size_t& { return c.train.total_steps; });
        add_real("beta1", [](auto& c) -> double& { return c.train.beta1; });
        add_real("beta2", [](auto& c) -> double& { return c.train.beta2; });
        add_real("adam_eps", [](auto& c) -> double& { return c.train.eps; });
        add_real("weight_decay", [](auto& c) -> double& { return c.train.weight_decay; });
        add_real("grad_clip", [](auto& c) -> double& { return c.train.grad_clip; });
        add_count("checkpoint_every", [](auto& c) -> size_t& { return c.train.checkpoint_every; });
        add_count("log_every", [](auto& c) -> size_t& { return c.train.log_every; });

        add_count("seq_len", [](auto& c) -> size_t& { return c.seq_len; });
        return k;
    }();
    return keys;
}

} // namespace

void RunConfig::resolve() {
    lm.resampler.width = lm.decoder.model_width;
    lm.resampler.input_dim = lm.vision.embed_dim;
    lm.resampler.latent_count = lm.decoder.soft_tokens;
    lm.validate();
    train.validate();
    if (seq_len == 0) throw DataError("seq_len must be positive");
    if (seq_len > lm.decoder.max_len)
        throw DataError("seq_len cannot exceed the model's maximum length");
}

std::string RunConfig::echo() const {
    std::string out;
    for (const auto& [name, binding] : bindings()) out += name + " = " + binding.get(*this) + "\n";
    return out;
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
        const auto& keys = bindings();
        auto it = std::find_if(keys.begin(), keys.end(),
                               [&](const auto& b) { return b.first == key; });
        if (it == keys.end())
            throw DataError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                            "'");
        it->second.set(cfg, key, value);
    }
    cfg.resolve();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return parse_run_config(in);
}

} // namespace mmlm
