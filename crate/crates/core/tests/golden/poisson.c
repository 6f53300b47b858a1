static const double pre0[36] = {
  0.36385355568100003, -0.03261792898999999, 0.32515793866400006, -0.160143448434,
  0.193737304135, 0.021250666496000013, -0.03261792899, 0.18046938651999994,
  -0.15124153723, 0.08955138946300001, 0.09420222577299997, 0.20731708766299997,
  0.32515793866400006, -0.15124153723, 0.8795247421660001, -0.4429974023400001,
  0.5598600035660001, -0.08582967335000004, -0.16014344843400002, 0.08955138946300004,
  -0.4429974023400001, 0.8815511831150001, -0.03600378959700005, 0.376427663132,
  0.19373730413499995, 0.09420222577299997, 0.559860003566, -0.0360037895970001,
  0.885171701721, 0.3090335170129999, 0.021250666496000013, 0.20731708766299997,
  -0.08582967335000001, 0.376427663132, 0.3090335170129999, 0.6186343087899999,
};

static const double pre1[36] = {
  -0.299183668976, 0.136422428326, -0.5249621813530001, 0.05777892121199999,
  -0.827364226119, -0.21715638023599995, 0.136422428326, -0.317179767198,
  0.012567910604000032, -0.429812624871, -0.45581819931799994, -0.528326404962,
  -0.5249621813530001, 0.012567910604000032, -1.076952959276, 0.7419314070240001,
  0.04686425465600008, 0.19458372625100007, 0.05777892121199999, -0.429812624871,
  0.7419314070240001, -0.48765668475000007, 0.030544827330999946, -0.5328662472,
  -0.827364226119, -0.45581819931799994, 0.04686425465600008, 0.030544827330999946,
  1.05442183924, -0.16269264836300001, -0.21715638023599995, -0.528326404962,
  0.19458372625100007, -0.5328662472, -0.16269264836300001, -0.57504252231,
};

static const double pre2[36] = {
  0.678811338111, 0.38117511233900003, 0.3975254053529999, -0.08143051776799999,
  -0.477242596515, 0.25633769813, 0.38117511233900003, 0.749609271947,
  0.05702863389000001, 0.05189630330099998, -0.41650272691900003, 0.31908078485900004,
  0.3975254053529999, 0.05702863389000001, 0.8194619578460001, -0.38996038131700006,
  -0.312991295207, -0.048877286391999994, -0.08143051776799999, 0.05189630330099998,
  -0.3899603813170001, 0.267804435253, 0.02188112516000005, 0.008789826454000012,
  -0.4772425965150001, -0.41650272691900003, -0.312991295207, 0.021881125160000042,
  0.518891099138, -0.145074593055, 0.25633769813, 0.319080784859,
  -0.04887728639200001, 0.008789826454000005, -0.14507459305500003, 0.322874286116,
};

void kernel(double *restrict A, const double *restrict W, const double *restrict X, const double *restrict a, const double *restrict b)
{
  double det = 0.0;
  double g0 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double j00 = 0.0;
  double j01 = 0.0;
  double j10 = 0.0;
  double j11 = 0.0;
  double z0 = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
  double z3 = 0.0;
  for (int e = 0; e < 1; ++e)
  {
    j00 = X[6 * e + 2] + (-1.0) * X[6 * e];
    j01 = X[6 * e + 4] + (-1.0) * X[6 * e];
    j10 = X[6 * e + 3] + (-1.0) * X[6 * e + 1];
    j11 = X[6 * e + 5] + (-1.0) * X[6 * e + 1];
    det = j00 * j11 + (-1.0) * j01 * j10;
    z0 = j11 / det;
    z1 = (-1.0) * j01 / det;
    z2 = (-1.0) * j10 / det;
    z3 = j00 / det;
    g0 = det * (z0 * z0 + z1 * z1);
    g1 = det * (z0 * z2 + z1 * z3);
    g2 = det * (z2 * z2 + z3 * z3);
    for (int j = 0; j < 6; ++j)
    {
      for (int k = 0; k < 6; ++k)
      {
        A[36 * e + 6 * j + k] += g0 * pre0[6 * j + k] + g1 * pre1[6 * j + k] + g2 * pre2[6 * j + k];
      }
    }
  }
}
