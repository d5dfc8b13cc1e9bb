#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mmlm/checkpoint.hpp"
#include "mmlm/lm.hpp"

using namespace mmlm;

namespace {

LmConfig small_cfg() {
    LmConfig cfg;
    cfg.decoder.layers = 1;
    cfg.decoder.model_width = 8;
    cfg.decoder.ffn_width = 16;
    cfg.decoder.heads = 2;
    cfg.decoder.soft_tokens = 2;
    cfg.decoder.max_len = 32;
    cfg.decoder.dropout = 0;
    cfg.vision.image_size = 8;
    cfg.vision.patch_size = 4;
    cfg.vision.embed_dim = 8;
    cfg.vision.depth = 2;
    cfg.vision.heads = 2;
    cfg.vision.ffn_width = 16;
    cfg.resampler.latent_count = 2;
    cfg.resampler.width = 8;
    cfg.resampler.input_dim = 8;
    cfg.resampler.heads = 2;
    cfg.resampler.ffn_width = 16;
    return cfg;
}

std::string temp_stem(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("mmlm_ckpt_" + tag);
    std::filesystem::create_directories(dir);
    return (dir / "model").string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool params_equal(ParamList<double>& a, ParamList<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name) return false;
        if (a[i].value.size() != b[i].value.size()) return false;
        if (std::memcmp(a[i].value.data(), b[i].value.data(), a[i].value.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("checkpoint round trip restores every parameter bit") {
    auto stem = temp_stem("roundtrip");
    MultimodalLM<double> a(small_cfg(), 101);
    auto pa = a.named_params();
    save_checkpoint(stem, pa, {{"note", "hello world with spaces"}});

    MultimodalLM<double> b(small_cfg(), 999); // different init
    auto pb = b.named_params();
    REQUIRE_FALSE(params_equal(pa, pb));
    auto meta = load_checkpoint(stem, pb);
    CHECK(params_equal(pa, pb));
    CHECK(meta.at("note") == "hello world with spaces");
}

TEST_CASE("checkpoint carries optimizer moments and step count") {
    auto stem = temp_stem("opt");
    MultimodalLM<double> a(small_cfg(), 7);
    auto pa = a.trainable_params();
    AdamW<double> oa(pa, {});
    // fabricate a step so the moments are non-trivial
    for (auto& p : pa) {
        p.value.set_requires_grad(true);
        for (size_t i = 0; i < p.value.size(); ++i) p.value.grad()[i] = 0.5;
    }
    oa.step(1e-3);
    oa.step(1e-3);
    save_checkpoint(stem, pa, &oa);

    MultimodalLM<double> b(small_cfg(), 8);
    auto pb = b.trainable_params();
    AdamW<double> ob(pb, {});
    load_checkpoint(stem, pb, &ob);
    CHECK(ob.step_count() == 2);
    CHECK(params_equal(pa, pb));

    // saving the restored state reproduces the files byte for byte
    auto stem2 = temp_stem("opt2");
    save_checkpoint(stem2, pb, &ob);
    CHECK(slurp(stem + ".blob") == slurp(stem2 + ".blob"));
    CHECK(slurp(stem + ".manifest") == slurp(stem2 + ".manifest"));
}

TEST_CASE("checkpoint loading is strict about contents") {
    auto stem = temp_stem("strict");
    Rng rng(3);
    ParamList<double> one;
    one.push_back({"w", Tensor<double>::randn({2, 3}, rng, 1.0)});
    save_checkpoint(stem, one);

    // wrong name
    ParamList<double> renamed;
    renamed.push_back({"v", Tensor<double>::zeros({2, 3})});
    CHECK_THROWS_AS(load_checkpoint(stem, renamed), DataError);

    // wrong shape
    ParamList<double> reshaped;
    reshaped.push_back({"w", Tensor<double>::zeros({3, 2})});
    CHECK_THROWS_AS(load_checkpoint(stem, reshaped), DataError);

    // wrong tensor count
    ParamList<double> extra = one;
    extra.push_back({"b", Tensor<double>::zeros({2})});
    CHECK_THROWS_AS(load_checkpoint(stem, extra), DataError);

    // wrong dtype
    ParamList<float> asf32;
    asf32.push_back({"w", Tensor<float>::zeros({2, 3})});
    CHECK_THROWS_AS(load_checkpoint(stem, asf32), DataError);

    // truncated blob
    auto blob = slurp(stem + ".blob");
    {
        std::ofstream out(stem + ".blob", std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size() - 4));
    }
    ParamList<double> again;
    again.push_back({"w", Tensor<double>::zeros({2, 3})});
    CHECK_THROWS_AS(load_checkpoint(stem, again), DataError);
}

TEST_CASE("manifest parsing rejects garbage") {
    auto stem = temp_stem("garbage");
    {
        std::ofstream mf(stem + ".manifest");
        mf << "not a manifest\n";
    }
    {
        std::ofstream bf(stem + ".blob", std::ios::binary);
    }
    ParamList<double> p;
    p.push_back({"w", Tensor<double>::zeros({1})});
    CHECK_THROWS_AS(load_checkpoint(stem, p), DataError);

    {
        std::ofstream mf(stem + ".manifest");
        mf << "mmckpt 1\nbogus record here\n";
    }
    CHECK_THROWS_AS(load_checkpoint(stem, p), DataError);

    CHECK_THROWS_AS(load_checkpoint(std::string("/nonexistent/path/model"), p), DataError);
}

TEST_CASE("float checkpoints round trip exactly too") {
    auto stem = temp_stem("f32");
    Rng rng(11);
    ParamList<float> a;
    a.push_back({"w", Tensor<float>::randn({4, 5}, rng, 2.0f)});
    a.push_back({"b", Tensor<float>::randn({7}, rng, 0.01f)});
    save_checkpoint(stem, a);

    ParamList<float> b;
    b.push_back({"w", Tensor<float>::zeros({4, 5})});
    b.push_back({"b", Tensor<float>::zeros({7})});
    load_checkpoint(stem, b);
    CHECK(std::memcmp(a[0].value.data(), b[0].value.data(), 20 * sizeof(float)) == 0);
    CHECK(std::memcmp(a[1].value.data(), b[1].value.data(), 7 * sizeof(float)) == 0);
}
