#include "core/blurnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace bs {

namespace {

MatX xavier(int rows, int cols, CounterRng& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    MatX w(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
    return w;
}

inline MatX relu(const MatX& x) { return x.cwiseMax(0.0); }

void encode_into(std::span<const double> values, int num_freqs, double* out) {
    for (size_t i = 0; i < values.size(); ++i) {
        double freq = M_PI;
        for (int k = 0; k < num_freqs; ++k) {
            *out++ = std::sin(freq * values[i]);
            *out++ = std::cos(freq * values[i]);
            freq *= 2.0;
        }
    }
}

// d(encoding)/d(v) for one scalar, accumulated from the encoded gradient.
double encode_backward_scalar(double v, int num_freqs, const double* d_encoded) {
    double grad = 0;
    double freq = M_PI;
    for (int k = 0; k < num_freqs; ++k) {
        grad += d_encoded[2 * k] * freq * std::cos(freq * v);
        grad -= d_encoded[2 * k + 1] * freq * std::sin(freq * v);
        freq *= 2.0;
    }
    return grad;
}

}  // namespace

std::vector<double> encode(std::span<const double> values, int num_freqs) {
    require(num_freqs >= 1, "encode: num_freqs must be >= 1");
    std::vector<double> out(values.size() * 2 * num_freqs);
    encode_into(values, num_freqs, out.data());
    return out;
}

BlurNet BlurNet::create(int m, int l_position, int l_view, uint64_t seed) {
    require(m >= 1, "BlurNet: m must be >= 1");
    BlurNet net;
    net.m = m;
    net.l_position = l_position;
    net.l_view = l_view;

    CounterRng rng(seed, 0x626c75726e6574ULL);
    const int in = net.input_dim();
    net.w1 = xavier(net.hidden, in, rng);
    net.w2 = xavier(net.hidden, net.hidden, rng);
    net.w3 = xavier(net.hidden, net.hidden, rng);
    net.b1 = VecX::Zero(net.hidden);
    net.b2 = VecX::Zero(net.hidden);
    net.b3 = VecX::Zero(net.hidden);
    // Heads are Xavier too: zero heads would make every transformed set
    // identical, and identical sets receive identical gradients, so they
    // could never separate. lambda_p/lambda_q keep the start near identity.
    net.w_mu = xavier(3 * m, net.hidden, rng);
    net.w_r = xavier(4 * m, net.hidden, rng);
    net.w_s = xavier(3 * m, net.hidden, rng);
    net.b_mu = VecX::Zero(3 * m);
    net.b_r = VecX::Zero(4 * m);
    net.b_s = VecX::Zero(3 * m);
    return net;
}

BlurNetForward predict_offsets(const BlurNet& net, const GaussianCloud& cloud,
                               const CameraPose& view) {
    const int n = static_cast<int>(cloud.size());
    const int in = net.input_dim();

    BlurNetForward fwd;
    fwd.input.resize(n, in);

    const Vec3 center = view.camera_center();
    std::vector<double> view_enc(6 * net.l_view);
    encode_into(std::span<const double>(center.data(), 3), net.l_view, view_enc.data());

    std::vector<double> row(in);
    for (int j = 0; j < n; ++j) {
        const Gaussian3D& g = cloud.gaussians[j];
        double* p = row.data();
        encode_into(std::span<const double>(g.position.data(), 3), net.l_position, p);
        p += 6 * net.l_position;
        for (int c = 0; c < 4; ++c) *p++ = g.rotation[c];
        const Vec3 s = g.scale();
        for (int c = 0; c < 3; ++c) *p++ = s[c];
        std::memcpy(p, view_enc.data(), view_enc.size() * sizeof(double));
        for (int c = 0; c < in; ++c) fwd.input(j, c) = row[c];
    }

    fwd.h1 = relu((fwd.input * net.w1.transpose()).rowwise() + net.b1.transpose());
    fwd.h2 = relu((fwd.h1 * net.w2.transpose()).rowwise() + net.b2.transpose());
    fwd.h3 = relu((fwd.h2 * net.w3.transpose()).rowwise() + net.b3.transpose());

    fwd.offsets.d_mu = (fwd.h3 * net.w_mu.transpose()).rowwise() + net.b_mu.transpose();
    const MatX z_r = (fwd.h3 * net.w_r.transpose()).rowwise() + net.b_r.transpose();
    const MatX z_s = (fwd.h3 * net.w_s.transpose()).rowwise() + net.b_s.transpose();
    fwd.offsets.d_r = z_r.unaryExpr([](double v) { return sigmoid(v); });
    fwd.offsets.d_s = z_s.unaryExpr([](double v) { return sigmoid(v); });
    return fwd;
}

std::vector<GaussianCloud> transform_sets(const GaussianCloud& cloud, const BlurOffsets& offsets,
                                          const BlurNet& net) {
    require(net.rho_r > 0 && net.rho_s > 0, "transform_sets: rho factors must be positive");
    const int n = static_cast<int>(cloud.size());
    std::vector<GaussianCloud> sets(net.m);
    for (int i = 0; i < net.m; ++i) {
        GaussianCloud& set = sets[i];
        set.sh_degree = cloud.sh_degree;
        set.gaussians = cloud.gaussians;
        for (int j = 0; j < n; ++j) {
            Gaussian3D& g = set.gaussians[j];
            for (int c = 0; c < 3; ++c)
                g.position[c] += net.lambda_p * offsets.d_mu(j, 3 * i + c);
            Vec4 q;
            for (int c = 0; c < 4; ++c) {
                const double u = net.lambda_q * offsets.d_r(j, 4 * i + c) + (1.0 - net.lambda_q);
                q[c] = g.rotation[c] * net.rho_r * std::min(1.0, u);
            }
            g.rotation = quat_normalized(q);
            for (int c = 0; c < 3; ++c) {
                const double u = net.lambda_q * offsets.d_s(j, 3 * i + c) + (1.0 - net.lambda_q);
                g.log_scale[c] += std::log(net.rho_s) + std::log(std::min(1.0, u));
            }
        }
    }
    return sets;
}

BlurRenderOutput render_blurred(const GaussianCloud& cloud, const BlurNet& net,
                                const CameraPose& pose, const CameraIntrinsics& intr,
                                const RenderOptions& opts) {
    require(!cloud.empty(), "render_blurred: cloud is empty");
    const BlurNetForward fwd = predict_offsets(net, cloud, pose);
    const std::vector<GaussianCloud> sets = transform_sets(cloud, fwd.offsets, net);

    BlurRenderOutput out;
    out.color = ImageBuffer(intr.width, intr.height, 3);
    out.depth = DepthMap(intr.width, intr.height);
    out.accum_alpha = ImageBuffer(intr.width, intr.height, 1);
    for (const GaussianCloud& set : sets) {
        const RenderOutput r = render(set, pose, intr, opts);
        for (size_t i = 0; i < out.color.data.size(); ++i) out.color.data[i] += r.color.data[i];
        for (size_t i = 0; i < out.depth.data.size(); ++i) out.depth.data[i] += r.depth.data[i];
        for (size_t i = 0; i < out.accum_alpha.data.size(); ++i)
            out.accum_alpha.data[i] += r.accum_alpha.data[i];
    }
    const double inv_m = 1.0 / net.m;
    for (double& v : out.color.data) v *= inv_m;
    for (double& v : out.depth.data) v *= inv_m;
    for (double& v : out.accum_alpha.data) v *= inv_m;
    return out;
}

ImageBuffer render_sharp(const GaussianCloud& cloud, const CameraPose& pose,
                         const CameraIntrinsics& intr, const RenderOptions& opts) {
    return render(cloud, pose, intr, opts).color;
}

BlurNetGradients BlurNetGradients::zeros_like(const BlurNet& net) {
    BlurNetGradients g;
    g.d_w1 = MatX::Zero(net.w1.rows(), net.w1.cols());
    g.d_w2 = MatX::Zero(net.w2.rows(), net.w2.cols());
    g.d_w3 = MatX::Zero(net.w3.rows(), net.w3.cols());
    g.d_b1 = VecX::Zero(net.b1.size());
    g.d_b2 = VecX::Zero(net.b2.size());
    g.d_b3 = VecX::Zero(net.b3.size());
    g.d_w_mu = MatX::Zero(net.w_mu.rows(), net.w_mu.cols());
    g.d_w_r = MatX::Zero(net.w_r.rows(), net.w_r.cols());
    g.d_w_s = MatX::Zero(net.w_s.rows(), net.w_s.cols());
    g.d_b_mu = VecX::Zero(net.b_mu.size());
    g.d_b_r = VecX::Zero(net.b_r.size());
    g.d_b_s = VecX::Zero(net.b_s.size());
    return g;
}

BlurBackwardResult render_blurred_backward(const GaussianCloud& cloud, const BlurNet& net,
                                           const CameraPose& pose, const CameraIntrinsics& intr,
                                           const RenderUpstream& upstream,
                                           const RenderOptions& opts) {
    require(!cloud.empty(), "render_blurred_backward: cloud is empty");
    const int n = static_cast<int>(cloud.size());
    const int sh_coeffs = cloud.sh_coeff_count();

    const BlurNetForward fwd = predict_offsets(net, cloud, pose);
    const std::vector<GaussianCloud> sets = transform_sets(cloud, fwd.offsets, net);

    BlurBackwardResult result;
    result.cloud.resize(n, sh_coeffs);
    result.net = BlurNetGradients::zeros_like(net);
    result.d_offsets.d_mu = MatX::Zero(n, 3 * net.m);
    result.d_offsets.d_r = MatX::Zero(n, 4 * net.m);
    result.d_offsets.d_s = MatX::Zero(n, 3 * net.m);

    // The mean over m renders splits the upstream evenly.
    RenderUpstream up_set;
    const double inv_m = 1.0 / net.m;
    up_set.d_color.resize(upstream.d_color.size());
    for (size_t i = 0; i < upstream.d_color.size(); ++i)
        up_set.d_color[i] = upstream.d_color[i] * inv_m;
    up_set.d_depth.resize(upstream.d_depth.size());
    for (size_t i = 0; i < upstream.d_depth.size(); ++i)
        up_set.d_depth[i] = upstream.d_depth[i] * inv_m;

    for (int i = 0; i < net.m; ++i) {
        const RenderGradients g = render_backward(sets[i], pose, intr, up_set, opts);
        result.cloud.d_pose_omega += g.d_pose_omega;
        result.cloud.d_pose_trans += g.d_pose_trans;

        for (int j = 0; j < n; ++j) {
            const Gaussian3D& base = cloud.gaussians[j];
            result.cloud.d_mean2d[j] += g.d_mean2d[j];

            // mu_hat = mu + lambda_p * d_mu
            result.cloud.d_position[j] += g.d_position[j];
            for (int c = 0; c < 3; ++c)
                result.d_offsets.d_mu(j, 3 * i + c) += net.lambda_p * g.d_position[j][c];

            // r_hat = normalize(r .* f), f_c = rho_r * min(1, lambda_q d_r + 1 - lambda_q).
            // The set stores the normalized quaternion, so chain its norm back in.
            Vec4 f, q_raw;
            for (int c = 0; c < 4; ++c) {
                const double u = net.lambda_q * fwd.offsets.d_r(j, 4 * i + c) + (1.0 - net.lambda_q);
                f[c] = net.rho_r * std::min(1.0, u);
                q_raw[c] = base.rotation[c] * f[c];
            }
            const Vec4 d_q_raw = g.d_rotation[j] / q_raw.norm();
            for (int c = 0; c < 4; ++c) {
                result.cloud.d_rotation[j][c] += d_q_raw[c] * f[c];
                const double d_f = d_q_raw[c] * base.rotation[c];
                const double u = net.lambda_q * fwd.offsets.d_r(j, 4 * i + c) + (1.0 - net.lambda_q);
                result.net.d_rho_r += d_f * std::min(1.0, u);
                if (u < 1.0)
                    result.d_offsets.d_r(j, 4 * i + c) += d_f * net.rho_r * net.lambda_q;
            }

            // log s_hat = log s + log rho_s + log(min(1, u_s))
            result.cloud.d_log_scale[j] += g.d_log_scale[j];
            for (int c = 0; c < 3; ++c) {
                result.net.d_rho_s += g.d_log_scale[j][c] / net.rho_s;
                const double u = net.lambda_q * fwd.offsets.d_s(j, 3 * i + c) + (1.0 - net.lambda_q);
                if (u < 1.0)
                    result.d_offsets.d_s(j, 3 * i + c) +=
                        g.d_log_scale[j][c] * net.lambda_q / u;
            }

            result.cloud.d_opacity_logit[j] += g.d_opacity_logit[j];
            for (int c = 0; c < sh_coeffs; ++c)
                result.cloud.d_sh[j * sh_coeffs + c] += g.d_sh[j * sh_coeffs + c];
        }
    }

    // Head pre-activation gradients (sigmoid chain for d_r / d_s).
    const MatX dz_mu = result.d_offsets.d_mu;
    MatX dz_r = result.d_offsets.d_r.cwiseProduct(
        fwd.offsets.d_r.unaryExpr([](double s) { return s * (1.0 - s); }));
    MatX dz_s = result.d_offsets.d_s.cwiseProduct(
        fwd.offsets.d_s.unaryExpr([](double s) { return s * (1.0 - s); }));

    result.net.d_w_mu = dz_mu.transpose() * fwd.h3;
    result.net.d_w_r = dz_r.transpose() * fwd.h3;
    result.net.d_w_s = dz_s.transpose() * fwd.h3;
    result.net.d_b_mu = dz_mu.colwise().sum().transpose();
    result.net.d_b_r = dz_r.colwise().sum().transpose();
    result.net.d_b_s = dz_s.colwise().sum().transpose();

    MatX dh3 = dz_mu * net.w_mu + dz_r * net.w_r + dz_s * net.w_s;
    MatX dz3 = dh3.cwiseProduct(fwd.h3.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
    result.net.d_w3 = dz3.transpose() * fwd.h2;
    result.net.d_b3 = dz3.colwise().sum().transpose();

    MatX dh2 = dz3 * net.w3;
    MatX dz2 = dh2.cwiseProduct(fwd.h2.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
    result.net.d_w2 = dz2.transpose() * fwd.h1;
    result.net.d_b2 = dz2.colwise().sum().transpose();

    MatX dh1 = dz2 * net.w2;
    MatX dz1 = dh1.cwiseProduct(fwd.h1.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
    result.net.d_w1 = dz1.transpose() * fwd.input;
    result.net.d_b1 = dz1.colwise().sum().transpose();

    // Input gradient back to cloud parameters and the view encoding.
    const MatX d_input = dz1 * net.w1;
    const Vec3 center = pose.camera_center();
    Vec3 d_center_total = Vec3::Zero();
    const int off_rot = 6 * net.l_position;
    const int off_scale = off_rot + 4;
    const int off_view = off_scale + 3;
    for (int j = 0; j < n; ++j) {
        const Gaussian3D& base = cloud.gaussians[j];
        const VecX din = d_input.row(j).transpose();
        for (int c = 0; c < 3; ++c)
            result.cloud.d_position[j][c] += encode_backward_scalar(
                base.position[c], net.l_position, din.data() + 2 * net.l_position * c);
        for (int c = 0; c < 4; ++c)
            result.cloud.d_rotation[j][c] += din[off_rot + c];
        const Vec3 s = base.scale();
        for (int c = 0; c < 3; ++c)
            result.cloud.d_log_scale[j][c] += din[off_scale + c] * s[c];
        for (int c = 0; c < 3; ++c)
            d_center_total[c] += encode_backward_scalar(
                center[c], net.l_view, din.data() + off_view + 2 * net.l_view * c);
    }
    // center = -R^T t is invariant to the rotational part of the left
    // perturbation, so gamma(p) feeds only the translation gradient.
    result.cloud.d_pose_trans += -(pose.rotation() * d_center_total);

    return result;
}

namespace {

constexpr char kNetMagic[4] = {'B', 'S', 'B', 'N'};
constexpr uint32_t kNetVersion = 1;

void write_matrix(std::ofstream& out, const MatX& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            const float v = static_cast<float>(m(r, c));
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
}

void read_matrix(std::ifstream& in, MatX& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            float v = 0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            m(r, c) = v;
        }
}

void write_vector(std::ofstream& out, const VecX& v) {
    for (int i = 0; i < v.size(); ++i) {
        const float f = static_cast<float>(v[i]);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
}

void read_vector(std::ifstream& in, VecX& v) {
    for (int i = 0; i < v.size(); ++i) {
        float f = 0;
        in.read(reinterpret_cast<char*>(&f), sizeof(f));
        v[i] = f;
    }
}

}  // namespace

void save_blurnet(const BlurNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path + " for writing");
    out.write(kNetMagic, 4);
    const uint32_t version = kNetVersion;
    const int32_t dims[4] = {net.m, net.l_position, net.l_view, net.hidden};
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    const float scalars[4] = {static_cast<float>(net.rho_r), static_cast<float>(net.rho_s),
                              static_cast<float>(net.lambda_p), static_cast<float>(net.lambda_q)};
    out.write(reinterpret_cast<const char*>(scalars), sizeof(scalars));
    write_matrix(out, net.w1);
    write_vector(out, net.b1);
    write_matrix(out, net.w2);
    write_vector(out, net.b2);
    write_matrix(out, net.w3);
    write_vector(out, net.b3);
    write_matrix(out, net.w_mu);
    write_vector(out, net.b_mu);
    write_matrix(out, net.w_r);
    write_vector(out, net.b_r);
    write_matrix(out, net.w_s);
    write_vector(out, net.b_s);
    if (!out) throw_io("write failed for " + path);
}

BlurNet load_blurnet(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kNetMagic, 4) != 0)
        throw_format(path + ": not a blurnet checkpoint");
    uint32_t version = 0;
    int32_t dims[4];
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (version != kNetVersion)
        throw_format(path + ": unsupported checkpoint version " + std::to_string(version));

    BlurNet net = BlurNet::create(dims[0], dims[1], dims[2], 0);
    if (dims[3] != net.hidden) throw_format(path + ": unexpected hidden size");
    float scalars[4];
    in.read(reinterpret_cast<char*>(scalars), sizeof(scalars));
    net.rho_r = scalars[0];
    net.rho_s = scalars[1];
    net.lambda_p = scalars[2];
    net.lambda_q = scalars[3];
    read_matrix(in, net.w1);
    read_vector(in, net.b1);
    read_matrix(in, net.w2);
    read_vector(in, net.b2);
    read_matrix(in, net.w3);
    read_vector(in, net.b3);
    read_matrix(in, net.w_mu);
    read_vector(in, net.b_mu);
    read_matrix(in, net.w_r);
    read_vector(in, net.b_r);
    read_matrix(in, net.w_s);
    read_vector(in, net.b_s);
    if (!in) throw_format(path + ": truncated checkpoint");
    return net;
}

}  // namespace bs
