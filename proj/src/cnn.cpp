#include "edgecache/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "edgecache/rng.hpp"

namespace edgecache {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kRunningStatFraction = 0.1;

struct LayerCache {
  std::vector<double> input;     // B x C x H x W (input to the conv)
  std::vector<double> conv_out;  // B x F x H x W
  std::vector<double> xhat;      // normalized conv_out
  std::vector<double> bn_out;    // scale * xhat + shift (pre-ReLU)
  std::vector<double> mean;      // per filter
  std::vector<double> var;       // per filter (biased)
};

struct ForwardPass {
  std::vector<LayerCache> layers;
  std::vector<double> features;  // B x F x H x W after the last ReLU
  std::vector<double> logits;    // B x classes
  std::vector<double> probs;     // B x classes
};

void conv_same(const std::vector<double>& in, int batch, int in_c, int h, int w,
               const ConvBlock& block, std::vector<double>* out) {
  const int f = block.out_channels;
  const int ph = (block.kernel_h - 1) / 2;
  const int pw = (block.kernel_w - 1) / 2;
  out->assign(static_cast<std::size_t>(batch) * f * h * w, 0.0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < batch; ++b) {
    for (int of = 0; of < f; ++of) {
      double* dst = &(*out)[(b * f + of) * plane];
      for (int c = 0; c < in_c; ++c) {
        const double* src = &in[(b * in_c + c) * plane];
        const double* ker =
            &block.weights[(static_cast<std::size_t>(of) * in_c + c) * block.kernel_h *
                           block.kernel_w];
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < block.kernel_h; ++i) {
              const int yy = y + i - ph;
              if (yy < 0 || yy >= h) continue;
              for (int j = 0; j < block.kernel_w; ++j) {
                const int xx = x + j - pw;
                if (xx < 0 || xx >= w) continue;
                acc += ker[i * block.kernel_w + j] * src[yy * w + xx];
              }
            }
            dst[y * w + x] += acc;
          }
        }
      }
    }
  }
}

// training=true uses batch statistics (cached for the backward pass),
// otherwise the stored running statistics.
void forward_batch(const CnnModel& model, const std::vector<double>& raw_pixels, int batch,
                   bool training, ForwardPass* pass) {
  const int h = model.input_height;
  const int w = model.input_width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  std::vector<double> current(static_cast<std::size_t>(batch) * plane);
  for (int b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      current[b * plane + i] = raw_pixels[b * plane + i] - model.input_mean[i];
    }
  }

  pass->layers.clear();
  pass->layers.resize(model.conv.size());
  for (std::size_t li = 0; li < model.conv.size(); ++li) {
    const ConvBlock& block = model.conv[li];
    LayerCache& cache = pass->layers[li];
    cache.input = current;
    conv_same(cache.input, batch, block.in_channels, h, w, block, &cache.conv_out);

    const int f = block.out_channels;
    const std::size_t n = static_cast<std::size_t>(batch) * plane;
    cache.mean.assign(f, 0.0);
    cache.var.assign(f, 0.0);
    if (training) {
      for (int of = 0; of < f; ++of) {
        double sum = 0.0;
        for (int b = 0; b < batch; ++b) {
          const double* v = &cache.conv_out[(b * f + of) * plane];
          for (std::size_t i = 0; i < plane; ++i) sum += v[i];
        }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (int b = 0; b < batch; ++b) {
          const double* v = &cache.conv_out[(b * f + of) * plane];
          for (std::size_t i = 0; i < plane; ++i) sq += (v[i] - mean) * (v[i] - mean);
        }
        cache.mean[of] = mean;
        cache.var[of] = sq / static_cast<double>(n);
      }
    } else {
      cache.mean = block.bn_running_mean;
      cache.var = block.bn_running_var;
    }

    cache.xhat.resize(cache.conv_out.size());
    cache.bn_out.resize(cache.conv_out.size());
    std::vector<double> relu(cache.conv_out.size());
    for (int b = 0; b < batch; ++b) {
      for (int of = 0; of < f; ++of) {
        const double inv_std = 1.0 / std::sqrt(cache.var[of] + block.bn_epsilon);
        const std::size_t base = (b * f + of) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xh = (cache.conv_out[base + i] - cache.mean[of]) * inv_std;
          cache.xhat[base + i] = xh;
          const double y = block.bn_scale[of] * xh + block.bn_shift[of];
          cache.bn_out[base + i] = y;
          relu[base + i] = y > 0.0 ? y : 0.0;
        }
      }
    }
    current = std::move(relu);
  }

  pass->features = current;
  const int classes = model.num_classes;
  const std::size_t feat = pass->features.size() / batch;
  pass->logits.assign(static_cast<std::size_t>(batch) * classes, 0.0);
  pass->probs.assign(static_cast<std::size_t>(batch) * classes, 0.0);
  for (int b = 0; b < batch; ++b) {
    const double* fv = &pass->features[b * feat];
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      double acc = model.fc_bias[c];
      const double* row = &model.fc_weights[c * feat];
      for (std::size_t j = 0; j < feat; ++j) acc += row[j] * fv[j];
      pass->logits[b * classes + c] = acc;
      max_logit = std::max(max_logit, acc);
    }
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double e = std::exp(pass->logits[b * classes + c] - max_logit);
      pass->probs[b * classes + c] = e;
      denom += e;
    }
    for (int c = 0; c < classes; ++c) pass->probs[b * classes + c] /= denom;
  }
}

double l2_term(const CnnModel& model, double l2_lambda) {
  if (l2_lambda == 0.0) return 0.0;
  double acc = 0.0;
  for (const ConvBlock& block : model.conv) {
    for (double v : block.weights) acc += v * v;
    for (double v : block.bn_scale) acc += v * v;
    // bn_shift stays out of the weight vector
  }
  for (double v : model.fc_weights) acc += v * v;
  for (double v : model.fc_bias) acc += v * v;
  return 0.5 * l2_lambda * acc;
}

double data_loss(const ForwardPass& pass, const std::vector<int>& labels, int classes) {
  double loss = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const double p = std::max(pass.probs[b * classes + labels[b]], kProbFloor);
    loss -= std::log(p);
  }
  return loss;
}

void check_batch(const CnnModel& model, const Batch& batch) {
  if (batch.count <= 0) throw std::invalid_argument("batch must be nonempty");
  const std::size_t plane =
      static_cast<std::size_t>(model.input_height) * model.input_width;
  if (batch.pixels.size() != plane * batch.count ||
      batch.labels.size() != static_cast<std::size_t>(batch.count)) {
    throw std::invalid_argument("batch dimensions do not match model input");
  }
  for (int label : batch.labels) {
    if (label < 0 || label >= model.num_classes) {
      throw std::invalid_argument("batch label out of class range");
    }
  }
}

}  // namespace

CnnModel init_model(int input_height, int input_width, int num_classes,
                    const TrainConfig& config) {
  if (input_height < 1 || input_width < 1 || num_classes < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (config.conv_layers < 1 || config.conv_layers > 4) {
    throw std::invalid_argument("conv depth must be between 1 and 4");
  }
  if (config.kernel_h % 2 == 0 || config.kernel_w % 2 == 0) {
    throw std::invalid_argument("kernel sides must be odd to preserve the input shape");
  }
  if (config.filters < 1 || config.batch_size < 1 || config.epochs < 0 ||
      !(config.learning_rate > 0) || config.l2_lambda < 0 || config.momentum < 0) {
    throw std::invalid_argument("hyperparameters must be positive");
  }

  Rng rng(config.seed);
  CnnModel model;
  model.input_height = input_height;
  model.input_width = input_width;
  model.num_classes = num_classes;
  model.input_mean.assign(static_cast<std::size_t>(input_height) * input_width, 0.0);
  model.hyper = config;

  for (int li = 0; li < config.conv_layers; ++li) {
    ConvBlock block;
    block.in_channels = li == 0 ? 1 : config.filters;
    block.out_channels = config.filters;
    block.kernel_h = config.kernel_h;
    block.kernel_w = config.kernel_w;
    const int fan_in = block.in_channels * block.kernel_h * block.kernel_w;
    const int fan_out = block.out_channels * block.kernel_h * block.kernel_w;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    block.weights.resize(static_cast<std::size_t>(block.out_channels) * block.in_channels *
                         block.kernel_h * block.kernel_w);
    for (double& v : block.weights) v = rng.uniform(-limit, limit);
    block.bn_scale.assign(config.filters, 1.0);
    block.bn_shift.assign(config.filters, 0.0);
    block.bn_running_mean.assign(config.filters, 0.0);
    block.bn_running_var.assign(config.filters, 1.0);
    model.conv.push_back(std::move(block));
  }

  const std::size_t feat =
      static_cast<std::size_t>(config.filters) * input_height * input_width;
  const double limit = std::sqrt(6.0 / (static_cast<double>(feat) + num_classes));
  model.fc_weights.resize(feat * num_classes);
  for (double& v : model.fc_weights) v = rng.uniform(-limit, limit);
  model.fc_bias.assign(num_classes, 0.0);
  return model;
}

std::vector<double> forward(const CnnModel& model, const std::vector<double>& pixels) {
  const std::size_t plane =
      static_cast<std::size_t>(model.input_height) * model.input_width;
  if (pixels.size() != plane) {
    throw std::invalid_argument("image dimensions do not match model input");
  }
  ForwardPass pass;
  forward_batch(model, pixels, 1, /*training=*/false, &pass);
  return std::vector<double>(pass.probs.begin(), pass.probs.begin() + model.num_classes);
}

std::vector<double> forward(const CnnModel& model, const FeatureImage& image) {
  if (image.height != model.input_height || image.width != model.input_width) {
    throw std::invalid_argument("image dimensions do not match model input");
  }
  return forward(model, image.pixels);
}

double batch_loss(const CnnModel& model, const Batch& batch, double l2_lambda) {
  check_batch(model, batch);
  ForwardPass pass;
  forward_batch(model, batch.pixels, batch.count, /*training=*/true, &pass);
  return data_loss(pass, batch.labels, model.num_classes) + l2_term(model, l2_lambda);
}

double batch_loss_and_gradients(const CnnModel& model, const Batch& batch, double l2_lambda,
                                double data_scale, Gradients* grads) {
  check_batch(model, batch);
  const int h = model.input_height;
  const int w = model.input_width;
  const int classes = model.num_classes;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const int batch_count = batch.count;

  ForwardPass pass;
  forward_batch(model, batch.pixels, batch_count, /*training=*/true, &pass);
  const double loss =
      data_scale * data_loss(pass, batch.labels, model.num_classes) + l2_term(model, l2_lambda);
  if (!grads) return loss;

  grads->conv.assign(model.conv.size(), {});
  for (std::size_t li = 0; li < model.conv.size(); ++li) {
    grads->conv[li].weights.assign(model.conv[li].weights.size(), 0.0);
    grads->conv[li].bn_scale.assign(model.conv[li].bn_scale.size(), 0.0);
    grads->conv[li].bn_shift.assign(model.conv[li].bn_shift.size(), 0.0);
  }
  const std::size_t feat = pass.features.size() / batch_count;
  grads->fc_weights.assign(model.fc_weights.size(), 0.0);
  grads->fc_bias.assign(model.fc_bias.size(), 0.0);

  // Softmax + cross-entropy.
  std::vector<double> dlogits(pass.logits.size());
  for (int b = 0; b < batch_count; ++b) {
    for (int c = 0; c < classes; ++c) {
      const double target = (c == batch.labels[b]) ? 1.0 : 0.0;
      dlogits[b * classes + c] = data_scale * (pass.probs[b * classes + c] - target);
    }
  }

  // Fully-connected layer.
  std::vector<double> dfeat(pass.features.size(), 0.0);
  for (int b = 0; b < batch_count; ++b) {
    const double* fv = &pass.features[b * feat];
    for (int c = 0; c < classes; ++c) {
      const double d = dlogits[b * classes + c];
      if (d == 0.0) continue;
      double* wrow = &grads->fc_weights[c * feat];
      const double* mrow = &model.fc_weights[c * feat];
      double* drow = &dfeat[b * feat];
      for (std::size_t j = 0; j < feat; ++j) {
        wrow[j] += d * fv[j];
        drow[j] += d * mrow[j];
      }
      grads->fc_bias[c] += d;
    }
  }
  if (l2_lambda != 0.0) {
    for (std::size_t j = 0; j < model.fc_weights.size(); ++j) {
      grads->fc_weights[j] += l2_lambda * model.fc_weights[j];
    }
    for (int c = 0; c < classes; ++c) grads->fc_bias[c] += l2_lambda * model.fc_bias[c];
  }

  // Conv blocks, last to first.
  std::vector<double> dcurrent = std::move(dfeat);
  for (int li = static_cast<int>(model.conv.size()) - 1; li >= 0; --li) {
    const ConvBlock& block = model.conv[li];
    const LayerCache& cache = pass.layers[li];
    Gradients::ConvGrads& cg = grads->conv[li];
    const int f = block.out_channels;
    const double n = static_cast<double>(batch_count) * plane;

    // ReLU mask.
    for (std::size_t i = 0; i < dcurrent.size(); ++i) {
      if (cache.bn_out[i] <= 0.0) dcurrent[i] = 0.0;
    }

    // Batch norm (training statistics).
    std::vector<double> dconv(dcurrent.size(), 0.0);
    for (int of = 0; of < f; ++of) {
      const double inv_std = 1.0 / std::sqrt(cache.var[of] + block.bn_epsilon);
      double dscale = 0.0;
      double dshift = 0.0;
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      for (int b = 0; b < batch_count; ++b) {
        const std::size_t base = (b * f + of) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dy = dcurrent[base + i];
          const double xh = cache.xhat[base + i];
          dscale += dy * xh;
          dshift += dy;
          const double dxh = dy * block.bn_scale[of];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xh;
        }
      }
      cg.bn_scale[of] += dscale;
      cg.bn_shift[of] += dshift;
      for (int b = 0; b < batch_count; ++b) {
        const std::size_t base = (b * f + of) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dxh = dcurrent[base + i] * block.bn_scale[of];
          const double xh = cache.xhat[base + i];
          dconv[base + i] =
              inv_std * (dxh - sum_dxhat / n - xh * sum_dxhat_xhat / n);
        }
      }
    }
    if (l2_lambda != 0.0) {
      for (int of = 0; of < f; ++of) cg.bn_scale[of] += l2_lambda * block.bn_scale[of];
    }

    // Convolution weights and (when needed) the input gradient.
    const int ph = (block.kernel_h - 1) / 2;
    const int pw = (block.kernel_w - 1) / 2;
    const bool need_dinput = li > 0;
    std::vector<double> dinput;
    if (need_dinput) {
      dinput.assign(cache.input.size(), 0.0);
    }
    for (int b = 0; b < batch_count; ++b) {
      for (int of = 0; of < f; ++of) {
        const double* dplane = &dconv[(b * f + of) * plane];
        for (int c = 0; c < block.in_channels; ++c) {
          const double* src = &cache.input[(b * block.in_channels + c) * plane];
          double* kgrad = &cg.weights[(static_cast<std::size_t>(of) * block.in_channels + c) *
                                      block.kernel_h * block.kernel_w];
          const double* ker =
              &block.weights[(static_cast<std::size_t>(of) * block.in_channels + c) *
                             block.kernel_h * block.kernel_w];
          double* dsrc = need_dinput ? &dinput[(b * block.in_channels + c) * plane] : nullptr;
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              const double d = dplane[y * w + x];
              if (d == 0.0) continue;
              for (int i = 0; i < block.kernel_h; ++i) {
                const int yy = y + i - ph;
                if (yy < 0 || yy >= h) continue;
                for (int j = 0; j < block.kernel_w; ++j) {
                  const int xx = x + j - pw;
                  if (xx < 0 || xx >= w) continue;
                  kgrad[i * block.kernel_w + j] += d * src[yy * w + xx];
                  if (dsrc) dsrc[yy * w + xx] += d * ker[i * block.kernel_w + j];
                }
              }
            }
          }
        }
      }
    }
    if (l2_lambda != 0.0) {
      for (std::size_t i = 0; i < block.weights.size(); ++i) {
        cg.weights[i] += l2_lambda * block.weights[i];
      }
    }
    if (need_dinput) dcurrent = std::move(dinput);
  }
  return loss;
}

double dataset_loss(const CnnModel& model, const LabeledDataset& data, int flow_index,
                    double l2_lambda) {
  if (data.size() == 0) throw std::invalid_argument("dataset must be nonempty");
  const std::size_t plane =
      static_cast<std::size_t>(model.input_height) * model.input_width;
  double ce = 0.0;
  const int chunk = 64;
  for (int start = 0; start < data.size(); start += chunk) {
    const int count = std::min(chunk, data.size() - start);
    std::vector<double> pixels(static_cast<std::size_t>(count) * plane);
    std::vector<int> labels(count);
    for (int i = 0; i < count; ++i) {
      std::copy(data.images[start + i].pixels.begin(), data.images[start + i].pixels.end(),
                pixels.begin() + i * plane);
      labels[i] = data.labels[start + i][flow_index];
    }
    ForwardPass pass;
    forward_batch(model, pixels, count, /*training=*/false, &pass);
    ce += data_loss(pass, labels, model.num_classes);
  }
  return ce / data.size() + l2_term(model, l2_lambda);
}

CnnModel train_model(const LabeledDataset& train, const LabeledDataset& val, int flow_index,
                     const TrainConfig& config, LossCurve* curve) {
  if (train.size() == 0) throw std::invalid_argument("training set must be nonempty");
  const FeatureImage& first = train.images.front();
  const std::size_t plane = static_cast<std::size_t>(first.height) * first.width;

  TrainConfig seeded = config;
  seeded.seed = derive_seed(config.seed, static_cast<std::uint64_t>(flow_index));
  CnnModel model = init_model(first.height, first.width, first.num_ecs, seeded);
  model.hyper = config;
  Rng rng(derive_seed(seeded.seed, 0x5u));

  // Per-pixel mean of the training images, subtracted on every forward pass.
  std::fill(model.input_mean.begin(), model.input_mean.end(), 0.0);
  for (const FeatureImage& img : train.images) {
    for (std::size_t i = 0; i < plane; ++i) model.input_mean[i] += img.pixels[i];
  }
  for (double& m : model.input_mean) m /= train.size();

  Gradients velocity;
  velocity.conv.resize(model.conv.size());
  for (std::size_t li = 0; li < model.conv.size(); ++li) {
    velocity.conv[li].weights.assign(model.conv[li].weights.size(), 0.0);
    velocity.conv[li].bn_scale.assign(model.conv[li].bn_scale.size(), 0.0);
    velocity.conv[li].bn_shift.assign(model.conv[li].bn_shift.size(), 0.0);
  }
  velocity.fc_weights.assign(model.fc_weights.size(), 0.0);
  velocity.fc_bias.assign(model.fc_bias.size(), 0.0);

  std::vector<int> order(train.size());
  for (int i = 0; i < train.size(); ++i) order[i] = i;

  Gradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < train.size(); start += config.batch_size) {
      const int count = std::min(config.batch_size, train.size() - start);
      Batch batch;
      batch.count = count;
      batch.pixels.resize(static_cast<std::size_t>(count) * plane);
      batch.labels.resize(count);
      for (int i = 0; i < count; ++i) {
        const int idx = order[start + i];
        std::copy(train.images[idx].pixels.begin(), train.images[idx].pixels.end(),
                  batch.pixels.begin() + i * plane);
        batch.labels[i] = train.labels[idx][flow_index];
      }

      // Mean data gradient over the mini-batch; L2 gradient unscaled.
      batch_loss_and_gradients(model, batch, config.l2_lambda, 1.0 / count, &grads);

      auto step = [&](std::vector<double>& w, std::vector<double>& v,
                      const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] - config.learning_rate * g[i];
          w[i] += v[i];
        }
      };
      for (std::size_t li = 0; li < model.conv.size(); ++li) {
        step(model.conv[li].weights, velocity.conv[li].weights, grads.conv[li].weights);
        step(model.conv[li].bn_scale, velocity.conv[li].bn_scale, grads.conv[li].bn_scale);
        step(model.conv[li].bn_shift, velocity.conv[li].bn_shift, grads.conv[li].bn_shift);
      }
      step(model.fc_weights, velocity.fc_weights, grads.fc_weights);
      step(model.fc_bias, velocity.fc_bias, grads.fc_bias);

      // Refresh the running statistics from this batch.
      ForwardPass pass;
      forward_batch(model, batch.pixels, batch.count, /*training=*/true, &pass);
      for (std::size_t li = 0; li < model.conv.size(); ++li) {
        ConvBlock& block = model.conv[li];
        for (int of = 0; of < block.out_channels; ++of) {
          block.bn_running_mean[of] = (1.0 - kRunningStatFraction) * block.bn_running_mean[of] +
                                      kRunningStatFraction * pass.layers[li].mean[of];
          block.bn_running_var[of] = (1.0 - kRunningStatFraction) * block.bn_running_var[of] +
                                     kRunningStatFraction * pass.layers[li].var[of];
        }
      }
    }
    if (curve) {
      curve->train_loss.push_back(dataset_loss(model, train, flow_index, config.l2_lambda));
      curve->val_loss.push_back(
          val.size() > 0 ? dataset_loss(model, val, flow_index, config.l2_lambda)
                         : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return model;
}

ModelEnsemble train_ensemble(const LabeledDataset& train, const LabeledDataset& val,
                             const TrainConfig& config, int jobs,
                             std::vector<LossCurve>* curves) {
  if (train.size() == 0) throw std::invalid_argument("training set must be nonempty");
  const int rows = train.images.front().height;
  ModelEnsemble ensemble;
  ensemble.flow_models.resize(rows);
  std::vector<LossCurve> local_curves(rows);

  if (jobs < 1) jobs = 1;
  jobs = std::min(jobs, rows);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t]() {
      try {
        for (int k = t; k < rows; k += jobs) {
          ensemble.flow_models[k] = train_model(train, val, k, config, &local_curves[k]);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  if (curves) *curves = std::move(local_curves);
  return ensemble;
}

ProbMatrix predict_matrix(const ModelEnsemble& models, const FeatureImage& image) {
  if (models.size() != image.height) {
    throw std::invalid_argument("expected " + std::to_string(image.height) +
                                " flow models, got " + std::to_string(models.size()));
  }
  for (const CnnModel& m : models.flow_models) {
    if (m.num_classes != image.num_ecs) {
      throw std::invalid_argument("model class count does not match image EC count");
    }
  }
  ProbMatrix out;
  out.num_flows = image.height;
  out.num_ecs = image.num_ecs;
  out.o.assign(static_cast<std::size_t>(out.num_flows) * out.num_ecs, 0.0);
  out.valid.assign(out.num_flows, 1);
  for (int k = 0; k < out.num_flows; ++k) {
    const std::vector<double> probs = forward(models.flow_models[k], image);
    std::copy(probs.begin(), probs.end(), out.o.begin() + static_cast<std::size_t>(k) * out.num_ecs);
    if (image.padded_rows[k]) out.valid[k] = 0;
  }
  return out;
}

}  // namespace edgecache
