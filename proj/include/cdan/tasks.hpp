#pragma once

// Benchmark transfer tasks: stretched two-moons and red/white wine quality.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "datasets.hpp"
#include "trainer.hpp"

namespace cdan {

/// Source: unstretched moons; target: moons stretched by `stretch`. Both
/// draws are seeded from the trial seed.
inline TaskData moons_task(double stretch, std::uint64_t seed, double noise_sigma = 0.05,
                           std::size_t n_per_class = 512) {
    Dataset src = generate_moons({n_per_class, 1.0, noise_sigma, detail::mix_seed(seed, 10)});
    Dataset tgt = generate_moons({n_per_class, stretch, noise_sigma, detail::mix_seed(seed, 11)});
    tgt.domain = Domain::target;
    return {std::move(src), std::move(tgt), std::nullopt};
}

inline LayerSpec moons_model() {
    LayerSpec s;
    s.input_dim = 2;
    s.hidden = {8, 8};
    return s;
}

/// Moons defaults: 100 epochs of minibatch 128.
inline TrainConfig moons_config(Method m) {
    TrainConfig c;
    c.method = m;
    apply_method_defaults(c);
    c.model = moons_model();
    c.batch_size = 128;
    return c;
}

/// Directory holding winequality-red.csv / winequality-white.csv:
/// $CDAN_WINE_DIR if set, else `fallback`.
inline std::filesystem::path wine_dir(const std::filesystem::path& fallback) {
    if (const char* env = std::getenv("CDAN_WINE_DIR"); env && *env) return env;
    return fallback;
}

struct WineData {
    Dataset red, white;
};

inline WineData load_wine(const std::filesystem::path& dir) {
    WineData w{load_delimited((dir / "winequality-red.csv").string(), ';', "quality"),
               load_delimited((dir / "winequality-white.csv").string(), ';', "quality")};
    if (w.red.dim() != w.white.dim())
        throw ConfigError("wine: red and white files have different columns");
    return w;
}

/// Red -> white (`red_to_white`) or white -> red regression task. Features
/// and quality are min-max scaled with statistics pooled over both files.
inline TaskData wine_task(const WineData& w, bool red_to_white) {
    const Dataset* both[] = {&w.red, &w.white};
    const auto scaler = fit_minmax(both);
    Dataset src = scaler.transform(red_to_white ? w.red : w.white);
    Dataset tgt = scaler.transform(red_to_white ? w.white : w.red);
    src.domain = Domain::source;
    tgt.domain = Domain::target;
    return {std::move(src), std::move(tgt), scaler};
}

inline LayerSpec wine_model(std::size_t input_dim) {
    LayerSpec s;
    s.input_dim = input_dim;
    s.hidden = {8, 8};
    s.output = OutputKind::regression;
    return s;
}

inline TrainConfig wine_config(Method m, std::size_t input_dim = 11) {
    TrainConfig c;
    c.method = m;
    apply_method_defaults(c);
    c.model = wine_model(input_dim);
    c.batch_size = 256;
    return c;
}

}  // namespace cdan
