"""
Broadwell IBVP - решение начально-краевой задачи для четырёхскоростной модели Бродвелла
методом характеристик и итераций Пикара
"""

__version__ = "1.0.0"
__author__ = "Broadwell IBVP"
