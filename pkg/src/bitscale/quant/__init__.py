from .spec import IntegerScheme, FloatScheme, QuantSpec, QuantParams
from .uniform import (
  calibrate_uniform, quantize, dequantize, fake_quant,
  quantize_values, fake_quant_values)
from .floating import fp_grid, fp_max, fp_quantize, fp_scale
from .transform import EquivTransform, equivalent_transform
from .simulate import simulate
