"""传输策略求解：闭式相位、穷举、交替优化及基线"""
