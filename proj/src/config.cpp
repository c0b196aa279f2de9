#include "ardiff/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ardiff {

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigError("config: " + where() + " must be an object");
        }
    }

    ~Section() = default;

    void read(const char* key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) fail(key, "expected an integer");
            const auto x = v->get<long long>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
                fail(key, "integer out of range");
            }
            out = static_cast<int>(x);
        }
    }

    void read(const char* key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void read(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
        }
    }

    void read(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
    }

    void read(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(key, "expected a string");
            out = v->get<std::string>();
        }
    }

    void read(const char* key, SampleMode& out) {
        std::string name;
        if (take(key) == nullptr) return;
        seen_.erase(key);
        read(key, name);
        try {
            out = parse_mode(name);
        } catch (const std::invalid_argument& e) {
            fail(key, e.what());
        }
    }

    /// Subsection, or nullptr when absent.
    const json* child(const char* key) {
        const json* v = take(key);
        if (v != nullptr && !v->is_object()) fail(key, "expected an object");
        return v;
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError("config: unknown field '" + field(key.c_str()) + "'");
            }
        }
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    [[noreturn]] void fail(const char* key, const std::string& what) const {
        throw ConfigError("config: " + field(key) + ": " + what);
    }

    std::string where() const { return path_.empty() ? "top level" : path_; }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
void section(Section& parent, const char* key, Fn&& fn) {
    if (const json* node = parent.child(key)) {
        Section s(*node, parent.field(key));
        fn(s);
        s.finish();
    }
}

int line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

void RunConfig::synchronize() {
    denoiser.frames = frames;
    denoiser.tokens = tokens;
    denoiser.dim = dim;
    denoiser.timesteps = schedule.timesteps;
    dataset.frames = frames;
    dataset.tokens = tokens;
    dataset.dim = dim;
    train.scale_factor = scale_factor;
    sample.frames = frames;
    sample.scale_factor = scale_factor;
}

void RunConfig::validate() const {
    try {
        if (schedule.timesteps < 1) {
            throw ConfigError("schedule.timesteps must be >= 1");
        }
        (void)schedule.build();
        denoiser.validate();
        dataset.validate();
        train.validate();
        if (sample.grid_steps < 1 || sample.grid_steps > schedule.timesteps) {
            throw ConfigError("sample.grid_steps must lie in [1, schedule.timesteps]");
        }
        if (sample.difference < 0) {
            throw ConfigError("sample.s must be non-negative");
        }
        if (sample.mode == SampleMode::Posterior && sample.grid_steps != schedule.timesteps) {
            throw ConfigError("sample.mode posterior requires sample.grid_steps == schedule.timesteps");
        }
        if (train.scale_factor != sample.scale_factor) {
            throw ConfigError("train and sample scale_factor differ");
        }
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: syntax error at line " + std::to_string(line_of(text, e.byte)) + ": " +
                          e.what());
    }

    RunConfig c;
    Section top(root, "");
    top.read("frames", c.frames);
    top.read("tokens", c.tokens);
    top.read("dim", c.dim);
    top.read("scale_factor", c.scale_factor);
    section(top, "schedule", [&](Section& s) {
        s.read("timesteps", c.schedule.timesteps);
        s.read("beta_start", c.schedule.beta_start);
        s.read("beta_end", c.schedule.beta_end);
    });
    section(top, "denoiser", [&](Section& s) {
        s.read("d_model", c.denoiser.d_model);
        s.read("n_layers", c.denoiser.n_layers);
        s.read("n_heads", c.denoiser.n_heads);
        s.read("mlp_hidden", c.denoiser.mlp_hidden);
        s.read("x0_clamp", c.denoiser.x0_clamp);
    });
    section(top, "dataset", [&](Section& s) {
        s.read("n_sequences", c.dataset.n_sequences);
        s.read("omega_min", c.dataset.omega_min);
        s.read("omega_max", c.dataset.omega_max);
        s.read("noise_std", c.dataset.noise_std);
        s.read("seed", c.dataset.seed);
    });
    section(top, "train", [&](Section& s) {
        s.read("steps", c.train.steps);
        s.read("batch_size", c.train.batch_size);
        s.read("learning_rate", c.train.learning_rate);
        s.read("finetune_steps", c.train.finetune_steps);
        s.read("finetune_learning_rate", c.train.finetune_learning_rate);
        s.read("momentum", c.train.momentum);
        s.read("grad_clip_norm", c.train.grad_clip_norm);
        s.read("ema_decay", c.train.ema_decay);
        s.read("seed", c.train.seed);
        s.read("remap_one_to_clean", c.train.fopp.remap_one_to_clean);
    });
    section(top, "sample", [&](Section& s) {
        s.read("grid_steps", c.sample.grid_steps);
        s.read("s", c.sample.difference);
        s.read("mode", c.sample.mode);
        s.read("seed", c.sample.seed);
    });
    section(top, "paths", [&](Section& s) {
        s.read("checkpoint", c.paths.checkpoint);
        s.read("dataset_cache", c.paths.dataset_cache);
        s.read("output_dir", c.paths.output_dir);
    });
    top.finish();

    c.synchronize();
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("config: cannot open " + path);
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
    json j;
    j["frames"] = c.frames;
    j["tokens"] = c.tokens;
    j["dim"] = c.dim;
    j["scale_factor"] = c.scale_factor;
    j["schedule"] = {{"timesteps", c.schedule.timesteps},
                     {"beta_start", c.schedule.beta_start},
                     {"beta_end", c.schedule.beta_end}};
    j["denoiser"] = {{"d_model", c.denoiser.d_model},
                     {"n_layers", c.denoiser.n_layers},
                     {"n_heads", c.denoiser.n_heads},
                     {"mlp_hidden", c.denoiser.mlp_hidden},
                     {"x0_clamp", c.denoiser.x0_clamp}};
    j["dataset"] = {{"n_sequences", c.dataset.n_sequences},
                    {"omega_min", c.dataset.omega_min},
                    {"omega_max", c.dataset.omega_max},
                    {"noise_std", c.dataset.noise_std},
                    {"seed", c.dataset.seed}};
    j["train"] = {{"steps", c.train.steps},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.learning_rate},
                  {"finetune_steps", c.train.finetune_steps},
                  {"finetune_learning_rate", c.train.finetune_learning_rate},
                  {"momentum", c.train.momentum},
                  {"grad_clip_norm", c.train.grad_clip_norm},
                  {"ema_decay", c.train.ema_decay},
                  {"seed", c.train.seed},
                  {"remap_one_to_clean", c.train.fopp.remap_one_to_clean}};
    j["sample"] = {{"grid_steps", c.sample.grid_steps},
                   {"s", c.sample.difference},
                   {"mode", std::string(mode_name(c.sample.mode))},
                   {"seed", c.sample.seed}};
    j["paths"] = {{"checkpoint", c.paths.checkpoint},
                  {"dataset_cache", c.paths.dataset_cache},
                  {"output_dir", c.paths.output_dir}};
    return j.dump(2) + "\n";
}

}  // namespace ardiff
