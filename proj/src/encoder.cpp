#include "edgecache/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace edgecache {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

FeatureImage blank_image(const Instance& instance) {
  FeatureImage img;
  img.num_ars = instance.topology.num_ars();
  img.num_ecs = instance.topology.num_ecs();
  img.num_links = instance.topology.num_links();
  img.height = instance.num_flows();
  img.width = img.num_ars + img.num_ecs + img.num_links;
  img.pixels.assign(static_cast<std::size_t>(img.height) * img.width, 0.0);
  img.padded_rows.assign(img.height, 0);
  return img;
}

}  // namespace

FeatureImage encode(const Instance& instance) {
  validate(instance);
  FeatureImage img = blank_image(instance);
  const UtilizationView view = utilization(instance);
  for (int k = 0; k < img.height; ++k) {
    double* row = &img.pixels[static_cast<std::size_t>(k) * img.width];
    for (int a = 0; a < img.num_ars; ++a) row[a] = clamp01(instance.flows[k].p[a]);
    for (int e = 0; e < img.num_ecs; ++e) row[img.q_column(e)] = clamp01(view.q_at(k, e));
    for (int l = 0; l < img.num_links; ++l) row[img.r_column(l)] = clamp01(view.r_at(k, l));
  }
  return img;
}

std::vector<FeatureImage> partition(const FeatureImage& image, int sub_height) {
  if (image.height < 1) throw std::invalid_argument("image height must be at least 1");
  if (sub_height < 1) throw std::invalid_argument("sub_height must be at least 1");
  const int count = (image.height + sub_height - 1) / sub_height;
  std::vector<FeatureImage> subs;
  subs.reserve(count);
  for (int i = 0; i < count; ++i) {
    FeatureImage sub;
    sub.num_ars = image.num_ars;
    sub.num_ecs = image.num_ecs;
    sub.num_links = image.num_links;
    sub.width = image.width;
    sub.height = sub_height;
    sub.excluded_ecs = image.excluded_ecs;
    sub.excluded_links = image.excluded_links;
    sub.pixels.assign(static_cast<std::size_t>(sub_height) * image.width, 0.0);
    sub.padded_rows.assign(sub_height, 0);
    for (int r = 0; r < sub_height; ++r) {
      const int src = i * sub_height + r;
      if (src < image.height) {
        std::copy_n(&image.pixels[static_cast<std::size_t>(src) * image.width], image.width,
                    &sub.pixels[static_cast<std::size_t>(r) * image.width]);
        sub.padded_rows[r] = image.padded_rows[src];
      } else {
        sub.padded_rows[r] = 1;
      }
    }
    subs.push_back(std::move(sub));
  }
  return subs;
}

ResidualUpdate apply_assignment_update(const Instance& instance, const Assignment& prior,
                                       const Routing& prior_routing) {
  if (prior.num_flows() != instance.num_flows()) {
    throw std::invalid_argument("assignment size does not match instance flow count");
  }
  const int nk = instance.num_flows();
  const int ne = instance.topology.num_ecs();
  const int nl = instance.topology.num_links();

  std::vector<double> ec_residual(instance.ec_capacity_mb);
  for (int k = 0; k < nk; ++k) {
    const int e = prior.ec_of_flow[k];
    if (e != Assignment::kUnassigned) ec_residual[e] -= instance.flows[k].s_mb;
  }
  std::vector<double> link_residual(instance.link_capacity_mbps);
  for (int k = 0; k < nk; ++k) {
    for (int l = 0; l < nl; ++l) {
      if (prior_routing.y_at(k, l)) link_residual[l] -= instance.flows[k].b_mbps;
    }
  }

  ResidualUpdate upd;
  upd.num_flows = nk;
  upd.num_ecs = ne;
  upd.num_links = nl;
  upd.q.assign(static_cast<std::size_t>(nk) * ne, 0.0);
  upd.r.assign(static_cast<std::size_t>(nk) * nl, 0.0);
  for (int e = 0; e < ne; ++e) {
    if (ec_residual[e] <= 0.0) upd.excluded_ecs.push_back(e);
  }
  for (int l = 0; l < nl; ++l) {
    if (link_residual[l] <= 0.0) upd.excluded_links.push_back(l);
  }
  for (int k = 0; k < nk; ++k) {
    for (int e = 0; e < ne; ++e) {
      upd.q[k * ne + e] =
          ec_residual[e] <= 0.0 ? 1.0 : clamp01(instance.flows[k].s_mb / ec_residual[e]);
    }
    for (int l = 0; l < nl; ++l) {
      upd.r[k * nl + l] =
          link_residual[l] <= 0.0 ? 1.0 : clamp01(instance.flows[k].b_mbps / link_residual[l]);
    }
  }
  return upd;
}

FeatureImage encode_with_residuals(const Instance& instance, const ResidualUpdate& update) {
  if (update.num_flows != instance.num_flows() ||
      update.num_ecs != instance.topology.num_ecs() ||
      update.num_links != instance.topology.num_links()) {
    throw std::invalid_argument("residual update dimensions do not match instance");
  }
  FeatureImage img = blank_image(instance);
  img.excluded_ecs = update.excluded_ecs;
  img.excluded_links = update.excluded_links;
  for (int k = 0; k < img.height; ++k) {
    double* row = &img.pixels[static_cast<std::size_t>(k) * img.width];
    for (int a = 0; a < img.num_ars; ++a) row[a] = clamp01(instance.flows[k].p[a]);
    for (int e = 0; e < img.num_ecs; ++e) row[img.q_column(e)] = update.q_at(k, e);
    for (int l = 0; l < img.num_links; ++l) row[img.r_column(l)] = update.r_at(k, l);
  }
  return img;
}

std::vector<std::uint8_t> to_pgm(const FeatureImage& image) {
  std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (double v : image.pixels) {
    const long byte = std::lround(clamp01(v) * 255.0);
    out.push_back(static_cast<std::uint8_t>(byte));
  }
  return out;
}

}  // namespace edgecache
