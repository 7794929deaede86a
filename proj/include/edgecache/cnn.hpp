#pragma once

#include <cstdint>
#include <vector>

#include "edgecache/encoder.hpp"

namespace edgecache {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int conv_layers = 1;
  int filters = 16;
  int kernel_h = 3;
  int kernel_w = 3;
  double l2_lambda = 1e-4;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

// One convolution block: same-padded conv (stride 1, no bias), batch
// normalization, ReLU.
struct ConvBlock {
  int in_channels = 1;
  int out_channels = 16;
  int kernel_h = 3;
  int kernel_w = 3;
  std::vector<double> weights;  // out x in x kh x kw

  std::vector<double> bn_scale;
  std::vector<double> bn_shift;
  std::vector<double> bn_running_mean;
  std::vector<double> bn_running_var;  // biased (1/N) variance
  double bn_epsilon = 1e-5;
};

// Per-flow classifier: input normalization, conv block(s), fully-connected
// layer, softmax over the EC classes.
struct CnnModel {
  int input_height = 0;
  int input_width = 0;
  int num_classes = 0;
  std::vector<double> input_mean;  // per-pixel training-set mean, H x W
  std::vector<ConvBlock> conv;
  std::vector<double> fc_weights;  // classes x (filters * H * W)
  std::vector<double> fc_bias;     // classes
  TrainConfig hyper;
};

// Seeded Glorot-uniform initialization; batch-norm scale 1 / shift 0 /
// running stats (0, 1); zero input mean.
CnnModel init_model(int input_height, int input_width, int num_classes,
                    const TrainConfig& config);

// Inference-mode forward pass (running batch-norm statistics); returns the
// softmax row over the classes.
std::vector<double> forward(const CnnModel& model, const FeatureImage& image);
std::vector<double> forward(const CnnModel& model, const std::vector<double>& pixels);

struct Batch {
  int count = 0;
  std::vector<double> pixels;  // count x H x W, raw (unnormalized) values
  std::vector<int> labels;     // EC index per sample
};

// Cross-entropy summed over the batch plus (lambda/2) WtW over all trainable
// weights except the batch-norm shift. Uses train-mode (batch) statistics;
// probabilities are clamped at 1e-12 before the log.
double batch_loss(const CnnModel& model, const Batch& batch, double l2_lambda);

struct Gradients {
  struct ConvGrads {
    std::vector<double> weights;
    std::vector<double> bn_scale;
    std::vector<double> bn_shift;
  };
  std::vector<ConvGrads> conv;
  std::vector<double> fc_weights;
  std::vector<double> fc_bias;
};

// Loss and analytic gradients; data_scale multiplies the data term (1 for
// the batch-sum loss, 1/batch for mean-gradient training steps). The L2
// term is never scaled.
double batch_loss_and_gradients(const CnnModel& model, const Batch& batch, double l2_lambda,
                                double data_scale, Gradients* grads);

struct LabeledDataset {
  std::vector<FeatureImage> images;
  std::vector<std::vector<int>> labels;  // per image: EC index per flow row

  int size() const { return static_cast<int>(images.size()); }
};

struct LossCurve {
  std::vector<double> train_loss;  // mean per-sample CE + L2 term, per epoch
  std::vector<double> val_loss;
};

// Mean per-sample cross-entropy over the dataset slice for one flow row,
// plus the L2 term; inference-mode statistics.
double dataset_loss(const CnnModel& model, const LabeledDataset& data, int flow_index,
                    double l2_lambda);

// Seeded mini-batch gradient descent with momentum on the labels of one flow
// row. Deterministic for a fixed config.
CnnModel train_model(const LabeledDataset& train, const LabeledDataset& val, int flow_index,
                     const TrainConfig& config, LossCurve* curve = nullptr);

struct ModelEnsemble {
  std::vector<CnnModel> flow_models;  // one per flow row of the trained height

  int size() const { return static_cast<int>(flow_models.size()); }
};

// The per-row models are independent; jobs > 1 trains them concurrently
// with per-model seeds, so results do not depend on the thread count.
ModelEnsemble train_ensemble(const LabeledDataset& train, const LabeledDataset& val,
                             const TrainConfig& config, int jobs = 1,
                             std::vector<LossCurve>* curves = nullptr);

struct ProbMatrix {
  int num_flows = 0;
  int num_ecs = 0;
  std::vector<double> o;            // |K| x |E|, softmax rows
  std::vector<std::uint8_t> valid;  // per row; 0 marks padded rows

  double at(int k, int e) const { return o[static_cast<std::size_t>(k) * num_ecs + e]; }
};

// Stacks one forward pass per flow row of the image. Rows flagged as padding
// are emitted but marked invalid.
ProbMatrix predict_matrix(const ModelEnsemble& models, const FeatureImage& image);

}  // namespace edgecache
