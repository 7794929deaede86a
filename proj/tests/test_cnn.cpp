#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "edgecache/cnn.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/serialize.hpp"

using namespace edgecache;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.filters = 4;
  c.kernel_h = 3;
  c.kernel_w = 3;
  c.seed = 11;
  return c;
}

Batch random_batch(int count, int h, int w, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.count = count;
  b.pixels.resize(static_cast<std::size_t>(count) * h * w);
  for (double& v : b.pixels) v = rng.next_double();
  b.labels.resize(count);
  for (int& label : b.labels) label = static_cast<int>(rng.next_below(classes));
  return b;
}

FeatureImage random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  FeatureImage img;
  img.height = h;
  img.width = w;
  img.num_ars = w - 2;
  img.num_ecs = 1;
  img.num_links = 1;
  img.pixels.resize(static_cast<std::size_t>(h) * w);
  for (double& v : img.pixels) v = rng.next_double();
  img.padded_rows.assign(h, 0);
  return img;
}

LabeledDataset tiny_dataset(int samples, int h, int w, int classes, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset data;
  for (int i = 0; i < samples; ++i) {
    FeatureImage img;
    img.height = h;
    img.width = w;
    img.num_ars = w - classes - 1;
    img.num_ecs = classes;
    img.num_links = 1;
    img.pixels.resize(static_cast<std::size_t>(h) * w);
    for (double& v : img.pixels) v = rng.next_double();
    img.padded_rows.assign(h, 0);
    data.images.push_back(std::move(img));
    std::vector<int> labels(h);
    for (int& l : labels) l = static_cast<int>(rng.next_below(classes));
    data.labels.push_back(std::move(labels));
  }
  return data;
}

}  // namespace

TEST_CASE("softmax rows are normalized for any input") {
  const CnnModel model = init_model(5, 33, 6, small_config());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::vector<double> probs = forward(model, random_image(5, 33, seed));
    double sum = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("all-zero weights give a uniform distribution") {
  CnnModel model = init_model(5, 33, 6, small_config());
  for (auto& block : model.conv) std::fill(block.weights.begin(), block.weights.end(), 0.0);
  std::fill(model.fc_weights.begin(), model.fc_weights.end(), 0.0);
  std::fill(model.fc_bias.begin(), model.fc_bias.end(), 0.0);
  const std::vector<double> probs = forward(model, random_image(5, 33, 3));
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("nudging one fc weight raises exactly that class") {
  CnnModel model = init_model(5, 33, 6, small_config());
  const FeatureImage img = random_image(5, 33, 9);
  const std::vector<double> before = forward(model, img);

  // Find a feature index with positive activation by probing the gradient
  // direction: bump weights one at a time until the class moves up.
  const std::size_t feat = model.fc_weights.size() / model.num_classes;
  bool exercised = false;
  for (std::size_t j = 0; j < feat && !exercised; ++j) {
    CnnModel bumped = model;
    bumped.fc_weights[2 * feat + j] += 1e-3;
    const std::vector<double> after = forward(bumped, img);
    if (after[2] == before[2]) continue;  // dead feature (ReLU off)
    CHECK(after[2] > before[2]);
    for (int c = 0; c < 6; ++c) {
      if (c != 2) CHECK(after[c] < before[c]);
    }
    exercised = true;
  }
  CHECK(exercised);
}

TEST_CASE("loss matches hand values") {
  CnnModel model = init_model(5, 33, 6, small_config());
  for (auto& block : model.conv) std::fill(block.weights.begin(), block.weights.end(), 0.0);
  std::fill(model.fc_weights.begin(), model.fc_weights.end(), 0.0);
  std::fill(model.fc_bias.begin(), model.fc_bias.end(), 0.0);

  Batch batch = random_batch(1, 5, 33, 6, 1);
  SUBCASE("uniform prediction over six classes") {
    CHECK(batch_loss(model, batch, 0.0) == doctest::Approx(std::log(6.0)).epsilon(1e-9));
  }
  SUBCASE("confident correct prediction approaches zero loss") {
    CnnModel confident = model;
    const std::size_t feat = confident.fc_weights.size() / 6;
    confident.fc_bias[batch.labels[0]] = 50.0;
    (void)feat;
    CHECK(batch_loss(confident, batch, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("pure regularizer") {
    // Zero every weight in the stack (batch-norm scale included, shift
    // excluded), then set two fc entries to 1 and sqrt(2): WtW = 3.
    CnnModel reg = model;
    for (auto& block : reg.conv) std::fill(block.bn_scale.begin(), block.bn_scale.end(), 0.0);
    reg.fc_weights[0] = 1.0;
    reg.fc_weights[1] = std::sqrt(2.0);
    const double data_term = batch_loss(reg, batch, 0.0);
    CHECK(batch_loss(reg, batch, 2.0) == doctest::Approx(data_term + 3.0).epsilon(1e-9));
  }
}

namespace {

// Central finite differences at h = 1e-3 are only a valid oracle away from
// the ReLU kinks, and batch norm centers its outputs at zero, so the
// fixture needs a margin: a small image (few activations near the kink) and
// enlarged conv weights (a weight nudge then barely moves the normalized
// activations). Seed 2 keeps every probed perturbation off the kinks.
void run_gradient_check(int blocks) {
  TrainConfig config;
  config.filters = 4;
  config.conv_layers = blocks;
  config.seed = 2;
  CnnModel model = init_model(5, 8, 4, config);
  for (auto& block : model.conv) {
    for (double& w : block.weights) w *= 10.0;
  }
  Rng prng(config.seed ^ 0xABCD);
  Batch batch;
  batch.count = 3;
  batch.pixels.resize(3 * 5 * 8);
  for (double& v : batch.pixels) v = prng.next_double();
  batch.labels = {0, 2, 1};
  const double lambda = 1e-2;

  Gradients grads;
  batch_loss_and_gradients(model, batch, lambda, 1.0, &grads);

  Rng rng(123);
  const double h = 1e-3;
  auto check_param = [&](double* param, double analytic) {
    const double original = *param;
    *param = original + h;
    const double plus = batch_loss(model, batch, lambda);
    *param = original - h;
    const double minus = batch_loss(model, batch, lambda);
    *param = original;
    const double numeric = (plus - minus) / (2.0 * h);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(rel <= 1e-4);
  };

  for (int li = 0; li < blocks; ++li) {
    for (int i = 0; i < 10; ++i) {
      const std::size_t j = rng.next_below(model.conv[li].weights.size());
      check_param(&model.conv[li].weights[j], grads.conv[li].weights[j]);
    }
    for (int i = 0; i < 4; ++i) {
      check_param(&model.conv[li].bn_scale[i], grads.conv[li].bn_scale[i]);
      check_param(&model.conv[li].bn_shift[i], grads.conv[li].bn_shift[i]);
    }
  }
  for (int i = 0; i < 12; ++i) {
    const std::size_t j = rng.next_below(model.fc_weights.size());
    check_param(&model.fc_weights[j], grads.fc_weights[j]);
  }
  for (int c = 0; c < 4; ++c) check_param(&model.fc_bias[c], grads.fc_bias[c]);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") { run_gradient_check(1); }

TEST_CASE("gradients check out on a two-block stack as well") { run_gradient_check(2); }

TEST_CASE("training is deterministic per seed") {
  const LabeledDataset data = tiny_dataset(24, 5, 12, 3, 5);
  TrainConfig config = small_config();
  config.epochs = 3;
  config.batch_size = 8;
  const CnnModel a = train_model(data, data, 0, config);
  const CnnModel b = train_model(data, data, 0, config);
  CHECK(a.fc_weights == b.fc_weights);
  CHECK(a.conv[0].weights == b.conv[0].weights);
  CHECK(a.conv[0].bn_running_mean == b.conv[0].bn_running_mean);
}

TEST_CASE("a tiny set can be overfit") {
  const LabeledDataset data = tiny_dataset(16, 5, 12, 3, 8);
  TrainConfig config = small_config();
  config.epochs = 200;
  config.batch_size = 16;
  config.learning_rate = 0.05;
  config.l2_lambda = 0.0;
  const CnnModel model = train_model(data, data, 0, config);
  CHECK(dataset_loss(model, data, 0, 0.0) < 0.05);
}

TEST_CASE("full-batch descent at a small step never increases the loss") {
  // Plain gradient descent (no momentum) on the train-mode objective that
  // the step actually descends; the reported LossCurve uses running
  // statistics and is not the descended function.
  const int h = 5, w = 12, classes = 3;
  const LabeledDataset data = tiny_dataset(16, h, w, classes, 13);
  TrainConfig config = small_config();
  CnnModel model = init_model(h, w, classes, config);

  Batch batch;
  batch.count = data.size();
  batch.pixels.reserve(static_cast<std::size_t>(batch.count) * h * w);
  for (const FeatureImage& img : data.images) {
    batch.pixels.insert(batch.pixels.end(), img.pixels.begin(), img.pixels.end());
  }
  for (const auto& labels : data.labels) batch.labels.push_back(labels[0]);

  const double lr = 1e-4;
  double prev = std::numeric_limits<double>::infinity();
  Gradients grads;
  for (int epoch = 0; epoch < 40; ++epoch) {
    const double loss = batch_loss_and_gradients(model, batch, 0.0, 1.0, &grads);
    CHECK(loss <= prev + 1e-9);
    prev = loss;
    for (std::size_t li = 0; li < model.conv.size(); ++li) {
      for (std::size_t i = 0; i < model.conv[li].weights.size(); ++i) {
        model.conv[li].weights[i] -= lr * grads.conv[li].weights[i];
      }
      for (std::size_t i = 0; i < model.conv[li].bn_scale.size(); ++i) {
        model.conv[li].bn_scale[i] -= lr * grads.conv[li].bn_scale[i];
        model.conv[li].bn_shift[i] -= lr * grads.conv[li].bn_shift[i];
      }
    }
    for (std::size_t i = 0; i < model.fc_weights.size(); ++i) {
      model.fc_weights[i] -= lr * grads.fc_weights[i];
    }
    for (std::size_t i = 0; i < model.fc_bias.size(); ++i) {
      model.fc_bias[i] -= lr * grads.fc_bias[i];
    }
  }
}

TEST_CASE("train and eval forward agree when running stats match the batch") {
  CnnModel model = init_model(5, 12, 3, small_config());
  const Batch batch = random_batch(6, 5, 12, 3, 3);
  // First pass captures batch statistics through the loss path; freeze them
  // as running statistics and compare eval-mode output on the same batch.
  Gradients grads;
  batch_loss_and_gradients(model, batch, 0.0, 1.0, &grads);

  // Recover batch statistics by direct computation on the conv output of a
  // model whose running stats are neutral. Simplest: set running stats from
  // a train-mode pass by re-deriving them numerically.
  // The train-mode loss equals the eval-mode loss once running stats equal
  // batch stats; verify via the loss value.
  const double train_mode_loss = batch_loss(model, batch, 0.0);

  // Compute batch stats explicitly: run eval forward with running stats
  // iteratively adjusted is overkill; instead reuse the training pass by
  // training zero epochs with a stats refresh. Here we exploit that
  // batch_loss uses train-mode stats: copying them via a single refresh in
  // train_model is not exposed, so recompute conv outputs by hand.
  const int f = model.conv[0].out_channels;
  const int hw = model.input_height * model.input_width;
  std::vector<double> normalized(batch.pixels.size());
  for (int b = 0; b < batch.count; ++b) {
    for (int i = 0; i < hw; ++i) {
      normalized[b * hw + i] = batch.pixels[b * hw + i] - model.input_mean[i];
    }
  }
  // Convolve manually (same padding) to get per-filter batch stats.
  const int kh = model.conv[0].kernel_h, kw = model.conv[0].kernel_w;
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int hgt = model.input_height, wid = model.input_width;
  std::vector<double> mean(f, 0.0), var(f, 0.0);
  std::vector<double> conv_out(static_cast<std::size_t>(batch.count) * f * hw, 0.0);
  for (int b = 0; b < batch.count; ++b) {
    for (int of = 0; of < f; ++of) {
      for (int y = 0; y < hgt; ++y) {
        for (int x = 0; x < wid; ++x) {
          double acc = 0.0;
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              const int yy = y + i - ph, xx = x + j - pw;
              if (yy < 0 || yy >= hgt || xx < 0 || xx >= wid) continue;
              acc += model.conv[0].weights[(of * 1 + 0) * kh * kw + i * kw + j] *
                     normalized[b * hw + yy * wid + xx];
            }
          }
          conv_out[(b * f + of) * hw + y * wid + x] = acc;
        }
      }
    }
  }
  const double n = static_cast<double>(batch.count) * hw;
  for (int of = 0; of < f; ++of) {
    double sum = 0.0;
    for (int b = 0; b < batch.count; ++b)
      for (int i = 0; i < hw; ++i) sum += conv_out[(b * f + of) * hw + i];
    mean[of] = sum / n;
    double sq = 0.0;
    for (int b = 0; b < batch.count; ++b)
      for (int i = 0; i < hw; ++i) {
        const double d = conv_out[(b * f + of) * hw + i] - mean[of];
        sq += d * d;
      }
    var[of] = sq / n;
  }
  model.conv[0].bn_running_mean = mean;
  model.conv[0].bn_running_var = var;

  // Eval-mode per-sample losses must reproduce the train-mode batch loss.
  double eval_loss = 0.0;
  for (int b = 0; b < batch.count; ++b) {
    std::vector<double> pixels(batch.pixels.begin() + b * hw,
                               batch.pixels.begin() + (b + 1) * hw);
    const std::vector<double> probs = forward(model, pixels);
    eval_loss -= std::log(std::max(probs[batch.labels[b]], 1e-12));
  }
  CHECK(eval_loss == doctest::Approx(train_mode_loss).epsilon(1e-6));
}

TEST_CASE("running variances stay positive through training") {
  const LabeledDataset data = tiny_dataset(24, 5, 12, 3, 5);
  TrainConfig config = small_config();
  config.epochs = 5;
  config.batch_size = 8;
  const CnnModel model = train_model(data, data, 0, config);
  for (double v : model.conv[0].bn_running_var) CHECK(v > 0.0);
}

TEST_CASE("predict_matrix stacks one row per model and flags padding") {
  const LabeledDataset data = tiny_dataset(8, 5, 12, 3, 2);
  TrainConfig config = small_config();
  config.epochs = 1;
  config.batch_size = 8;
  const ModelEnsemble ensemble = train_ensemble(data, data, config);
  REQUIRE(ensemble.size() == 5);

  FeatureImage img = data.images[0];
  img.padded_rows[4] = 1;
  const ProbMatrix probs = predict_matrix(ensemble, img);
  CHECK(probs.num_flows == 5);
  CHECK(probs.num_ecs == 3);
  for (int k = 0; k < 5; ++k) {
    double sum = 0.0;
    for (int e = 0; e < 3; ++e) sum += probs.at(k, e);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(probs.valid[3] == 1);
  CHECK(probs.valid[4] == 0);
}

TEST_CASE("predict_matrix rejects a model-count mismatch") {
  const LabeledDataset data = tiny_dataset(4, 5, 12, 3, 2);
  TrainConfig config = small_config();
  config.epochs = 1;
  ModelEnsemble ensemble = train_ensemble(data, data, config);
  ensemble.flow_models.pop_back();
  CHECK_THROWS_AS(predict_matrix(ensemble, data.images[0]), std::invalid_argument);
}

TEST_CASE("parallel ensemble training matches the sequential result") {
  const LabeledDataset data = tiny_dataset(16, 5, 12, 3, 31);
  TrainConfig config = small_config();
  config.epochs = 2;
  config.batch_size = 8;
  const ModelEnsemble seq = train_ensemble(data, data, config, 1);
  const ModelEnsemble par = train_ensemble(data, data, config, 4);
  REQUIRE(seq.size() == par.size());
  for (int k = 0; k < seq.size(); ++k) {
    CHECK(seq.flow_models[k].fc_weights == par.flow_models[k].fc_weights);
  }
}

TEST_CASE("model ensembles survive a JSON round trip bit-exactly") {
  const LabeledDataset data = tiny_dataset(8, 5, 12, 3, 17);
  TrainConfig config = small_config();
  config.epochs = 2;
  config.batch_size = 8;
  const ModelEnsemble ensemble = train_ensemble(data, data, config);
  const std::string text = models_to_json(ensemble);
  const ModelEnsemble back = models_from_json(text);
  CHECK(models_to_json(back) == text);
  const std::vector<double> a = forward(ensemble.flow_models[0], data.images[0]);
  const std::vector<double> b = forward(back.flow_models[0], data.images[0]);
  CHECK(a == b);
}

TEST_CASE("model construction validates its configuration") {
  TrainConfig config = small_config();
  SUBCASE("even kernels cannot preserve the shape") {
    config.kernel_w = 4;
    CHECK_THROWS_AS(init_model(5, 33, 6, config), std::invalid_argument);
  }
  SUBCASE("depth is capped at four") {
    config.conv_layers = 5;
    CHECK_THROWS_AS(init_model(5, 33, 6, config), std::invalid_argument);
  }
  SUBCASE("depth must be at least one") {
    config.conv_layers = 0;
    CHECK_THROWS_AS(init_model(5, 33, 6, config), std::invalid_argument);
  }
}
