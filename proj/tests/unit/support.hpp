#pragma once

#include <memory>

#include "handjog/compress.hpp"
#include "handjog/pipeline.hpp"

namespace handjog::testing {

struct Trained {
    MlpParams params;
    DatasetSplit split;
};

/// Default model on the default synthetic set; trained once per process.
inline const Trained& trained() {
    static const Trained t = [] {
        const Dataset d = generate_synthetic_dataset(SyntheticOptions{});
        Trained r;
        r.split = split_dataset(d, 50, 7);
        r.params = train(r.split.train, r.split.val, default_layer_spec(), TrainConfig{}).params;
        return r;
    }();
    return t;
}

inline std::shared_ptr<const Classifier> quantized_classifier() {
    static const auto c =
        std::make_shared<const Classifier>(quantize(trained().params, trained().split.train));
    return c;
}

}  // namespace handjog::testing
