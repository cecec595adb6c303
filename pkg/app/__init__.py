"""理想 MHD 离散守恒律验证工具"""
