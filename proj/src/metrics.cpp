#include "styland/metrics.hpp"

#include "styland/depth_ops.hpp"
#include "styland/inference.hpp"
#include "styland/nn/rng.hpp"

#include <cmath>
#include <cstdio>

namespace styland::metrics {

namespace {

constexpr double kNegativeTolerance = 1e-8;

Eigen::VectorXd clipped_eigenvalues(const Eigen::VectorXd& values, const char* what) {
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -kNegativeTolerance * scale) {
    throw Error(ErrorKind::invalid_argument,
                std::string(what) + " is not positive semi-definite (eigenvalue " + std::to_string(values.minCoeff()) + ")");
  }
  return values.cwiseMax(0.0);
}

void check_covariance(const Eigen::MatrixXd& c, Eigen::Index d, const char* what) {
  if (c.rows() != d || c.cols() != d) throw Error(ErrorKind::shape_mismatch, std::string(what) + " has the wrong size");
  if (!c.allFinite()) throw Error(ErrorKind::non_finite, std::string(what) + " is not finite");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error(ErrorKind::invalid_argument, std::string(what) + " is not symmetric");
  }
}

std::vector<float> box_blur(const float* src, int h, int w, int radius) {
  std::vector<float> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      int count = 0;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
          sum += src[yy * w + xx];
          ++count;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(sum / count);
    }
  }
  return out;
}

nn::Tensor<float> depth_as_image(const DepthMap<float>& d) {
  nn::Tensor<float> t = d.tensor();
  t.data() = t.data() * 2.0f - 1.0f;
  return t;
}

}  // namespace

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& cov2) {
  const auto d = mu1.size();
  if (mu2.size() != d) throw Error(ErrorKind::shape_mismatch, "mean vectors differ in length");
  check_covariance(cov1, d, "first covariance");
  check_covariance(cov2, d, "second covariance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(cov1);
  const Eigen::VectorXd l1 = clipped_eigenvalues(e1.eigenvalues(), "first covariance");
  clipped_eigenvalues(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov2, Eigen::EigenvaluesOnly).eigenvalues(),
                      "second covariance");
  const Eigen::MatrixXd s1 = e1.eigenvectors() * l1.cwiseSqrt().asDiagonal() * e1.eigenvectors().transpose();
  const Eigen::MatrixXd m = s1 * cov2 * s1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = clipped_eigenvalues(em.eigenvalues(), "covariance product").cwiseSqrt().sum();
  return (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
}

Gaussian feature_gaussian(const nn::RowMatrix<double>& f) {
  const auto n = f.rows();
  const auto d = f.cols();
  if (n < 2) throw Error(ErrorKind::invalid_argument, "at least two samples are needed for a covariance");
  Gaussian g;
  g.mean = f.colwise().mean().transpose();
  const Eigen::MatrixXd centered = f.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  if (n <= d) {
    g.shrinkage = static_cast<double>(d) / static_cast<double>(n + d);
    const double target = g.cov.trace() / static_cast<double>(d);
    g.cov *= 1.0 - g.shrinkage;
    g.cov.diagonal().array() += g.shrinkage * target;
  }
  return g;
}

nn::Tensor<float> stack(const std::vector<nn::Tensor<float>>& items) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "nothing to stack");
  nn::Shape s = items.front().shape();
  const auto per = s.sample();
  s.n = 0;
  for (const auto& t : items) {
    if (t.shape().sample() != per || t.c() != s.c) throw Error(ErrorKind::shape_mismatch, "stacked tensors differ in shape");
    s.n += t.n();
  }
  nn::Tensor<float> out(s);
  Eigen::Index pos = 0;
  for (const auto& t : items) {
    out.data().segment(pos, t.size()) = t.data();
    pos += t.size();
  }
  return out;
}

nn::RowMatrix<double> extract(const FeatureExtractor<float>& extractor, const nn::Tensor<float>& x) {
  constexpr int chunk = 16;
  nn::RowMatrix<double> out(x.n(), extractor.dim());
  const auto per = x.shape().sample();
  for (int start = 0; start < x.n(); start += chunk) {
    const int count = std::min(chunk, x.n() - start);
    nn::Tensor<float> part(nn::Shape{count, x.c(), x.h(), x.w()});
    part.data() = x.data().segment(start * per, count * per);
    out.middleRows(start, count) = extractor.pooled_features(part);
  }
  return out;
}

double fid(const nn::Tensor<float>& real, const nn::Tensor<float>& fake, const FeatureExtractor<float>& extractor) {
  if (real.n() == 0 || fake.n() == 0) throw Error(ErrorKind::invalid_argument, "fid needs non-empty sets");
  const auto a = feature_gaussian(extract(extractor, real));
  const auto b = feature_gaussian(extract(extractor, fake));
  return frechet_distance(a.mean, a.cov, b.mean, b.cov);
}

double mean_pairwise_distance(const std::vector<nn::Tensor<float>>& samples, const FeatureExtractor<float>& extractor) {
  if (samples.size() < 2) throw Error(ErrorKind::invalid_argument, "diversity needs at least two samples");
  double sum = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      sum += perceptual_distance(extractor, samples[i], samples[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double diversity_lpips(const GeneratorWeights<float>& weights, const SegmentationMap& seg, const DepthMap<float>* depth,
                       int k, std::uint64_t seed, const FeatureExtractor<float>& extractor) {
  if (k < 2) throw Error(ErrorKind::invalid_argument, "diversity needs k >= 2");
  std::vector<nn::Tensor<float>> samples;
  if (weights.config.mode == Mode::s2d) {
    for (const auto& d : inference::phase1_sample_depths(weights, seg, k, seed)) samples.push_back(depth_as_image(d));
  } else {
    for (auto& im : inference::phase2_sample_images(weights, seg, depth, k, seed)) samples.push_back(std::move(im.tensor()));
  }
  return mean_pairwise_distance(samples, extractor);
}

double depth_rmse(const DepthMap<float>& ref, const DepthMap<float>& est) {
  if (ref.height() != est.height() || ref.width() != est.width()) {
    throw Error(ErrorKind::shape_mismatch, "depth maps differ in size");
  }
  const auto diff = (ref.values().cast<double>() - est.values().cast<double>()) * 255.0;
  return std::sqrt(diff.square().mean());
}

Eigen::MatrixXd DepthReadout::pixel_features(const ImageTensor<float>& image) {
  const int h = image.height();
  const int w = image.width();
  const auto plane = static_cast<std::ptrdiff_t>(h) * w;
  if (image.channels() != 3) throw Error(ErrorKind::shape_mismatch, "depth readout needs RGB images");
  const float* px = image.tensor().ptr();
  std::vector<float> lum(static_cast<std::size_t>(plane));
  for (std::ptrdiff_t p = 0; p < plane; ++p) lum[static_cast<std::size_t>(p)] = (px[p] + px[plane + p] + px[2 * plane + p]) / 3.0f;
  std::vector<float> lum_sq(lum.size());
  for (std::size_t p = 0; p < lum.size(); ++p) lum_sq[p] = lum[p] * lum[p];
  const auto lum_mean = box_blur(lum.data(), h, w, 1);
  const auto lum_sq_mean = box_blur(lum_sq.data(), h, w, 1);
  std::array<std::vector<float>, 3> blur3;
  std::array<std::vector<float>, 3> blur7;
  for (int c = 0; c < 3; ++c) {
    blur3[static_cast<std::size_t>(c)] = box_blur(px + c * plane, h, w, 1);
    blur7[static_cast<std::size_t>(c)] = box_blur(px + c * plane, h, w, 3);
  }
  Eigen::MatrixXd f(plane, kFeatures);
  for (std::ptrdiff_t p = 0; p < plane; ++p) {
    const auto q = static_cast<std::size_t>(p);
    const double r = px[p];
    const double g = px[plane + p];
    const double b = px[2 * plane + p];
    f.row(p) << r, g, b, blur3[0][q], blur3[1][q], blur3[2][q], blur7[0][q], blur7[1][q], blur7[2][q], r * r, g * g,
        b * b, std::max({r, g, b}) - std::min({r, g, b}), std::sqrt(std::max(0.0f, lum_sq_mean[q] - lum_mean[q] * lum_mean[q])),
        lum[q], 1.0;
  }
  return f;
}

DepthReadout DepthReadout::fit(const std::vector<data::Triplet>& items, double ridge) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "depth readout needs training pairs");
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(kFeatures, kFeatures);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(kFeatures);
  double pixels = 0;
  for (const auto& t : items) {
    const auto f = pixel_features(t.image);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXf>(t.depth.values().data(), t.depth.values().size()).cast<double>();
    xtx.noalias() += f.transpose() * f;
    xty.noalias() += f.transpose() * y;
    pixels += static_cast<double>(f.rows());
  }
  xtx /= pixels;
  xty /= pixels;
  xtx.diagonal().array() += ridge;
  DepthReadout r;
  r.coef_ = xtx.ldlt().solve(xty);
  return r;
}

DepthMap<float> DepthReadout::predict(const ImageTensor<float>& image) const {
  const Eigen::VectorXd y = (pixel_features(image) * coef_).array().min(1.0).max(0.0);
  Grid<float> g(image.height(), image.width());
  Eigen::Map<Eigen::VectorXf>(g.data(), g.size()) = y.cast<float>();
  return DepthMap<float>(std::move(g));
}

ModelSamples sample_model(const GeneratorWeights<float>& weights, const std::vector<data::Triplet>& test,
                          std::uint64_t seed, const DepthReadout* readout) {
  ModelSamples s;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto item_seed = nn::mix_seed(seed, i);
    if (weights.config.mode == Mode::s2d) {
      s.depths.push_back(inference::phase1_sample_depths(weights, test[i].seg, 1, item_seed).front());
    } else {
      auto im = inference::phase2_sample_images(weights, test[i].seg, &test[i].depth, 1, item_seed).front();
      if (readout != nullptr) s.depths.push_back(readout->predict(im));
      s.images.push_back(std::move(im));
    }
  }
  return s;
}

EvalReport evaluate_samples(const std::vector<data::Triplet>& test, const ModelSamples& samples,
                            const FeatureExtractor<float>& extractor, Mode mode) {
  if (test.empty()) throw Error(ErrorKind::invalid_argument, "empty test set");
  EvalReport r;
  r.mode = to_string(mode);
  r.test_items = static_cast<int>(test.size());
  r.extractor_id = extractor.id();
  std::vector<nn::Tensor<float>> real;
  std::vector<nn::Tensor<float>> fake;
  if (mode == Mode::s2d) {
    if (samples.depths.size() != test.size()) throw Error(ErrorKind::shape_mismatch, "one depth sample per test item expected");
    for (std::size_t i = 0; i < test.size(); ++i) {
      real.push_back(depth_as_image(test[i].depth));
      fake.push_back(depth_as_image(samples.depths[i]));
    }
  } else {
    if (samples.images.size() != test.size()) throw Error(ErrorKind::shape_mismatch, "one image sample per test item expected");
    for (std::size_t i = 0; i < test.size(); ++i) {
      real.push_back(test[i].image.tensor());
      fake.push_back(samples.images[i].tensor());
    }
  }
  r.fid = fid(stack(real), stack(fake), extractor);
  if (samples.depths.size() == test.size()) {
    double rmse = 0;
    int agree = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      rmse += depth_rmse(test[i].depth, samples.depths[i]);
      agree += depth_order(test[i].depth, test[i].seg) == depth_order(samples.depths[i], test[i].seg);
    }
    r.depth_rmse = rmse / static_cast<double>(test.size());
    r.order_agreement = agree / static_cast<double>(test.size());
  } else {
    r.depth_rmse = std::nan("");
    r.order_agreement = std::nan("");
  }
  return r;
}

EvalReport evaluate_model(const GeneratorWeights<float>& weights, const std::vector<data::Triplet>& test,
                          const FeatureExtractor<float>& extractor, const EvalSettings& settings,
                          const DepthReadout* readout, const std::string& name) {
  auto r = evaluate_samples(test, sample_model(weights, test, settings.seed, readout), extractor, weights.config.mode);
  r.model = name;
  r.seed = settings.seed;
  r.diversity_k = settings.diversity_k;
  const int maps = std::min<int>(settings.diversity_maps, static_cast<int>(test.size()));
  double div = 0;
  for (int i = 0; i < maps; ++i) {
    const auto& t = test[static_cast<std::size_t>(i)];
    div += diversity_lpips(weights, t.seg, &t.depth, settings.diversity_k, nn::mix_seed(settings.seed ^ 0x5eedULL, i),
                           extractor);
  }
  r.diversity = maps > 0 ? div / maps : 0.0;
  return r;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "model,mode,test_items,fid,lpips_diversity,depth_rmse,order_agreement,extractor,seed,diversity_k\n";
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%s,%llu,%d\n", r.model.c_str(), r.mode.c_str(),
                  r.test_items, r.fid, r.diversity, r.depth_rmse, r.order_agreement, r.extractor_id.c_str(),
                  static_cast<unsigned long long>(r.seed), r.diversity_k);
    out << buf;
  }
}

}  // namespace styland::metrics
