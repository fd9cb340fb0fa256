#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "tssr/config.hpp"
#include "tssr/error.hpp"

using namespace tssr;

TEST_CASE("defaults follow the documented training setup") {
  const RunConfig c;
  CHECK(c.ppo.steps_per_epoch == 512);
  CHECK(c.ppo.steps_per_collect == 60);
  CHECK(c.ppo.batch_size == 512);
  CHECK(c.ppo.epochs == 1000);
  CHECK(c.ppo.gamma == 0.99);
  CHECK(c.ppo.gae_lambda == 0.95);
  CHECK(c.ppo.eps_clip == 0.2);
  CHECK(c.ppo.ent_coef == 0.01);
  CHECK(c.ppo.vf_coef == 0.5);
  CHECK(c.ppo.max_grad_norm == 0.5);
  CHECK(c.tssr.k_subst == 8);
  CHECK(c.tssr.e_max == 12);
  CHECK(c.pretrain.beta == 0.1);
  CHECK(c.pretrain.clip == 10.0);
  CHECK(c.hidden_dim == 512);
  CHECK(c.num_layers == 3);
  CHECK(c.dims(30).embed_dim == 60);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("set/get round trip and unknown keys") {
  RunConfig c;
  c.set("gamma", "0.9");
  CHECK(c.ppo.gamma == 0.9);
  c.set("mode", "frl");
  CHECK(c.train_mode() == TrainMode::Pretrained);
  c.set("lr", "");
  CHECK_FALSE(c.ppo.lr);
  c.set("head_input", "all");
  CHECK(c.head_input == HeadInput::All);
  CHECK_THROWS_WITH_AS(c.set("gamm", "1"), doctest::Contains("gamm"), ValidationError);
  CHECK_THROWS_AS(c.set("epochs", "ten"), ValidationError);
  c.set("mode", "xrl");
  CHECK_THROWS_AS(c.validate(), ValidationError);
  for (const auto& k : config_keys()) {
    RunConfig d = c;
    d.set(k.name, c.get(k.name));
    CHECK(d.get(k.name) == c.get(k.name));
  }
}

TEST_CASE("files merge, comments are ignored, dumps reload identically") {
  const auto dir = test::scratch("config");
  {
    std::ofstream f(dir / "a.cfg");
    f << "# desk run\nseed = 7\n  gamma = 0.97   # discount\n\nhidden_dim=64\n";
  }
  RunConfig c;
  c.load(dir / "a.cfg");
  CHECK(c.seed == 7);
  CHECK(c.ppo.gamma == 0.97);
  CHECK(c.hidden_dim == 64);
  c.save(dir / "b.cfg");
  RunConfig d;
  d.load(dir / "b.cfg");
  CHECK(d.str() == c.str());
  {
    std::ofstream f(dir / "bad.cfg");
    f << "seed 7\n";
  }
  CHECK_THROWS_AS(d.load(dir / "bad.cfg"), ValidationError);
  CHECK_THROWS(d.load(dir / "missing.cfg"));
}

TEST_CASE("validation rejects out-of-range values") {
  RunConfig c;
  c.ppo.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.tssr.lambda_swap = 0.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
